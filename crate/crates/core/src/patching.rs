//! Overlapping block extraction and overlap-averaging reassembly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Vectorized `n`x`n` blocks, one per column, in row-major pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    pub block_size: usize,
    pub data: DMatrix<f64>,
    /// Top-left `(row, col)` of each column's block.
    pub origins: Vec<(usize, usize)>,
}

impl BlockSet {
    pub fn new(block_size: usize, data: DMatrix<f64>, origins: Vec<(usize, usize)>) -> Result<Self> {
        if data.nrows() != block_size * block_size {
            return Err(Error::DimensionMismatch(format!(
                "block size {block_size} needs {} rows, got {}",
                block_size * block_size,
                data.nrows()
            )));
        }
        if data.ncols() != origins.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} origins",
                data.ncols(),
                origins.len()
            )));
        }
        Ok(Self {
            block_size,
            data,
            origins,
        })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.block_size * self.block_size
    }

    /// Keeps the columns listed in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> BlockSet {
        let data = self.data.select_columns(indices.iter());
        let origins = indices.iter().map(|&i| self.origins[i]).collect();
        BlockSet {
            block_size: self.block_size,
            data,
            origins,
        }
    }

    /// Returns a copy with each column's mean removed.
    pub fn without_dc(&self) -> BlockSet {
        let mut out = self.clone();
        for mut col in out.data.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    }
}

/// Per-block population variance (denominator `n^2`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub variances: Vec<f64>,
}

/// Origin offsets along one axis: multiples of `stride`, plus `extent - n`
/// so the last pixel is always covered.
pub fn axis_offsets(extent: usize, n: usize, stride: usize) -> Vec<usize> {
    let last = extent - n;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

fn check_geometry(img: &GrayImage, n: usize, stride: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("block size must be >= 1".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if n > img.width() || n > img.height() {
        return Err(Error::BlockTooLarge {
            block: n,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Row-major list of block origins covering the image.
pub fn block_origins(img: &GrayImage, n: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    check_geometry(img, n, stride)?;
    let rows = axis_offsets(img.height(), n, stride);
    let cols = axis_offsets(img.width(), n, stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect())
}

/// Copies the block at `origin` into `out` (length `n^2`).
#[inline]
pub fn read_block(img: &GrayImage, n: usize, origin: (usize, usize), out: &mut [f64]) {
    let (r0, c0) = origin;
    let w = img.width();
    let src = img.samples();
    for dr in 0..n {
        let start = (r0 + dr) * w + c0;
        out[dr * n..(dr + 1) * n].copy_from_slice(&src[start..start + n]);
    }
}

/// Extracts the blocks at the given origins.
pub fn extract_blocks_at(img: &GrayImage, n: usize, origins: Vec<(usize, usize)>) -> Result<BlockSet> {
    for &(r, c) in &origins {
        if r + n > img.height() || c + n > img.width() {
            return Err(Error::OriginOutOfBounds { row: r, col: c });
        }
    }
    let mut data = DMatrix::zeros(n * n, origins.len());
    for (j, &o) in origins.iter().enumerate() {
        read_block(img, n, o, data.column_mut(j).as_mut_slice());
    }
    BlockSet::new(n, data, origins)
}

/// Extracts every `n`x`n` block on a `stride` grid, completed at the bottom
/// and right edges.
pub fn extract_blocks(img: &GrayImage, n: usize, stride: usize) -> Result<BlockSet> {
    let origins = block_origins(img, n, stride)?;
    extract_blocks_at(img, n, origins)
}

pub fn block_variances(blocks: &BlockSet) -> BlockStats {
    let variances = blocks
        .data
        .column_iter()
        .map(|col| {
            let m = col.len() as f64;
            let mean = col.sum() / m;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / m).max(0.0)
        })
        .collect();
    BlockStats { variances }
}

/// Running per-pixel sums of block estimates.
#[derive(Debug, Clone)]
pub struct OverlapAccumulator {
    width: usize,
    height: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl OverlapAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            sums: vec![0.0; width * height],
            counts: vec![0; width * height],
        }
    }

    pub fn add_block(&mut self, n: usize, origin: (usize, usize), values: &[f64]) -> Result<()> {
        let (r0, c0) = origin;
        if r0 + n > self.height || c0 + n > self.width {
            return Err(Error::OriginOutOfBounds { row: r0, col: c0 });
        }
        for dr in 0..n {
            let base = (r0 + dr) * self.width + c0;
            let src = &values[dr * n..(dr + 1) * n];
            for (k, v) in src.iter().enumerate() {
                self.sums[base + k] += v;
                self.counts[base + k] += 1;
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `(lambda * noisy + sum) / (lambda + count)` per pixel.
    pub fn finish(&self, noisy: &GrayImage, lambda_avg: f64) -> Result<GrayImage> {
        if noisy.width() != self.width || noisy.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "accumulator {}x{} vs image {}x{}",
                self.width,
                self.height,
                noisy.width(),
                noisy.height()
            )));
        }
        let samples = noisy
            .samples()
            .iter()
            .zip(self.sums.iter().zip(&self.counts))
            .map(|(&y, (&s, &k))| {
                let denom = lambda_avg + f64::from(k);
                if denom > 0.0 {
                    (lambda_avg * y + s) / denom
                } else {
                    y
                }
            })
            .collect();
        GrayImage::new(self.width, self.height, samples)
    }
}

/// Averages overlapping block estimates, blended with the noisy image by
/// weight `lambda_avg`.
pub fn assemble_image(denoised: &BlockSet, noisy: &GrayImage, lambda_avg: f64) -> Result<GrayImage> {
    if !(lambda_avg >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_avg must be >= 0, got {lambda_avg}"
        )));
    }
    let n = denoised.block_size;
    let mut acc = OverlapAccumulator::new(noisy.width(), noisy.height());
    for (col, &origin) in denoised.data.column_iter().zip(&denoised.origins) {
        acc.add_block(n, origin, col.as_slice())?;
    }
    acc.finish(noisy, lambda_avg)
}

/// Reads the block at `origin` as a column vector.
pub fn block_vector(img: &GrayImage, n: usize, origin: (usize, usize)) -> DVector<f64> {
    let mut v = DVector::zeros(n * n);
    read_block(img, n, origin, v.as_mut_slice());
    v
}
