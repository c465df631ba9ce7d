//! Grayscale image container and PSNR.

use crate::error::{Error, Result};

/// Row-major grid of real-valued luminance samples.
///
/// Samples nominally live in `[0, 255]` but are not clamped: noisy images
/// routinely leave that range and only [`crate::pgm::write_pgm`] clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                samples.push(f(r, c));
            }
        }
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.samples[row * self.width + col] = value;
    }

    /// Copies the `width`x`height` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}@({row},{col}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(width, height, |r, c| self.get(row + r, col + c))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Mean squared sample difference.
    pub fn mse(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let sum: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.samples.len() as f64)
    }
}

/// Peak value used by [`psnr`].
pub const PEAK: f64 = 255.0;

/// `10 log10(255^2 / MSE)` in decibels; `f64::INFINITY` when the images are identical.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    let mse = a.mse(b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// PSNR a noise standard deviation `sigma` is expected to produce.
pub fn expected_noisy_psnr(sigma: f64) -> f64 {
    10.0 * (PEAK * PEAK / (sigma * sigma)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(matches!(
            GrayImage::new(2, 2, vec![0.0; 3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let a = GrayImage::from_fn(4, 3, |r, c| (r * 10 + c) as f64).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_known_value() {
        // Uniform error of 1 everywhere -> MSE 1 -> 20 log10(255).
        let a = GrayImage::filled(3, 3, 10.0).unwrap();
        let b = GrayImage::filled(3, 3, 11.0).unwrap();
        let expected = 20.0 * 255f64.log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let a = GrayImage::filled(3, 3, 0.0).unwrap();
        let b = GrayImage::filled(3, 4, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn expected_psnr_matches_table_header() {
        for (sigma, db) in [(5.0, 34.16), (10.0, 28.14), (20.0, 22.11)] {
            assert!((expected_noisy_psnr(sigma) - db).abs() < 0.02);
        }
    }

    #[test]
    fn crop_bounds() {
        let a = GrayImage::from_fn(5, 4, |r, c| (r * 5 + c) as f64).unwrap();
        let w = a.crop(1, 2, 3, 2).unwrap();
        assert_eq!(w.samples(), &[7.0, 8.0, 9.0, 12.0, 13.0, 14.0]);
        assert!(a.crop(3, 0, 5, 2).is_err());
    }
}
