//! End-to-end denoising: training-block selection, K-lines clustering,
//! dictionary construction, per-block pursuit and overlap averaging.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    cluster_spectrum, clustering_cost, klines, ClusterConfig, ClusterModel, ClusterModelDoc,
    ClusteringCost,
};
use crate::coder::Coder;
use crate::config::PipelineConfig;
use crate::dictionary::{build_dictionary, Dictionary};
use crate::equalization::{select_training_indices, uniform_indices};
use crate::error::{Error, Result};
use crate::image::{psnr, GrayImage};
use crate::patching::{
    axis_offsets, block_variances, extract_blocks, read_block, BlockSet, OverlapAccumulator,
};

/// How the training subset is drawn from the candidate blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "count")]
pub enum Selection {
    /// Variance-histogram equalization.
    Equalized,
    /// `count` blocks drawn uniformly at random.
    Uniform(usize),
}

/// Wall time per stage, seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extract: f64,
    pub select: f64,
    pub cluster: f64,
    pub dictionary: f64,
    pub code: f64,
    pub assemble: f64,
    pub total: f64,
}

/// Everything learned from the noisy image before coding.
#[derive(Debug, Clone)]
pub struct Training {
    /// Training blocks as clustered (mean-removed when the dictionary carries a DC atom).
    pub blocks: BlockSet,
    pub candidate_blocks: usize,
    pub retained_fraction: f64,
    pub model: ClusterModel,
    pub cost: ClusteringCost,
    pub dictionary: Dictionary,
}

impl Training {
    /// Cluster model document including the per-cluster noisy eigenvalues.
    pub fn model_doc(&self, sigma: f64) -> Result<ClusterModelDoc> {
        let spectrum = cluster_spectrum(&self.blocks.data, &self.model, sigma)?;
        let mut eigs = vec![None; self.model.k()];
        for c in spectrum.clusters {
            eigs[c.cluster] = Some(c.noisy_eigenvalues);
        }
        let mut doc = ClusterModelDoc::from_model(&self.model);
        doc.second_moment_eigenvalues = Some(eigs);
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    /// Present only when a clean reference was supplied. Identical images give `null`.
    pub psnr_noisy: Option<f64>,
    pub psnr_denoised: Option<f64>,
    /// Summed per-cluster MSE bound of the training clustering.
    pub j_omega: Option<f64>,
    /// Same, over non-smooth clusters only.
    pub j_omega_non_smooth: Option<f64>,
    pub retained_fraction: Option<f64>,
    pub candidate_blocks: Option<usize>,
    pub training_blocks: Option<usize>,
    pub selection: Option<Selection>,
    pub clustering_objective: Option<f64>,
    pub cluster_sizes: Option<Vec<usize>>,
    pub atom_count: usize,
    pub coded_blocks: usize,
    /// Mean number of atoms used per coded block.
    pub mean_support: f64,
    pub timings: StageTimings,
    /// Effective configuration with derived defaults filled in.
    pub config: PipelineConfig,
}

impl DenoiseReport {
    /// Same report with wall times zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: StageTimings::default(),
            ..self.clone()
        }
    }
}

/// Extracts candidate training blocks, selects a subset, clusters it and
/// builds the dictionary.
pub fn train(noisy: &GrayImage, cfg: &PipelineConfig, selection: Selection) -> Result<(Training, StageTimings)> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let candidates = extract_blocks(noisy, cfg.block_size, cfg.training_stride)?;
    timings.extract = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let keep = match selection {
        Selection::Equalized => {
            let stats = block_variances(&candidates);
            select_training_indices(&stats, &cfg.equalization_policy())?
        }
        Selection::Uniform(count) => uniform_indices(candidates.len(), count, cfg.seeds.uniform_selection)?,
    };
    if keep.is_empty() {
        return Err(Error::Empty("no training blocks retained"));
    }
    let mut blocks = candidates.select(&keep);
    if cfg.center_training_blocks {
        blocks = blocks.without_dc();
    }
    let retained_fraction = keep.len() as f64 / candidates.len() as f64;
    timings.select = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ccfg = ClusterConfig::new(cfg.clusters, cfg.seeds.clustering).with_max_iters(cfg.max_iters);
    let model = klines(&blocks.data, &ccfg)?;
    let spectrum = cluster_spectrum(&blocks.data, &model, cfg.sigma)?;
    let cost = clustering_cost(&spectrum, cfg.sigma, cfg.smooth_cutoff())?;
    timings.cluster = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let dictionary = build_dictionary(&blocks.data, &model, cfg.sigma, &cfg.dictionary_options())?;
    timings.dictionary = t.elapsed().as_secs_f64();

    Ok((
        Training {
            blocks,
            candidate_blocks: candidates.len(),
            retained_fraction,
            model,
            cost,
            dictionary,
        },
        timings,
    ))
}

/// Result of coding every block of an image.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: GrayImage,
    pub coded_blocks: usize,
    pub mean_support: f64,
    pub code_seconds: f64,
    pub assemble_seconds: f64,
}

/// Codes every block on the denoising grid over `dict` and averages the
/// projections back into an image.
pub fn reconstruct(noisy: &GrayImage, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let n = cfg.block_size;
    if dict.dim() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "dictionary atoms have {} entries, blocks have {}",
            dict.dim(),
            n * n
        )));
    }
    if n > noisy.width() || n > noisy.height() {
        return Err(Error::BlockTooLarge {
            block: n,
            width: noisy.width(),
            height: noisy.height(),
        });
    }
    let coder = Coder::new(dict, cfg.coder_config()?)?;
    let rows = axis_offsets(noisy.height(), n, cfg.denoise_stride);
    let cols = axis_offsets(noisy.width(), n, cfg.denoise_stride);
    let mut acc = OverlapAccumulator::new(noisy.width(), noisy.height());
    let mut code_seconds = 0.0;
    let mut assemble_seconds = 0.0;
    let mut total_support = 0usize;
    let mut coded = 0usize;

    let mut chunk = DMatrix::zeros(n * n, cols.len());
    for &r in &rows {
        let t = Instant::now();
        for (j, &c) in cols.iter().enumerate() {
            read_block(noisy, n, (r, c), chunk.column_mut(j).as_mut_slice());
        }
        let corr = dict.atoms.tr_mul(&chunk);
        let estimates: Vec<(Vec<f64>, usize)> = (0..cols.len())
            .into_par_iter()
            .map(|j| {
                let code = coder.code_with_correlations(chunk.column(j).as_slice(), corr.column(j).as_slice());
                (code.reconstruct(dict), code.support.len())
            })
            .collect();
        code_seconds += t.elapsed().as_secs_f64();

        let t = Instant::now();
        for (&c, (est, support)) in cols.iter().zip(estimates) {
            acc.add_block(n, (r, c), &est)?;
            total_support += support;
            coded += 1;
        }
        assemble_seconds += t.elapsed().as_secs_f64();
    }
    let t = Instant::now();
    let image = acc.finish(noisy, cfg.lambda_avg())?;
    assemble_seconds += t.elapsed().as_secs_f64();
    Ok(Reconstruction {
        image,
        coded_blocks: coded,
        mean_support: total_support as f64 / coded as f64,
        code_seconds,
        assemble_seconds,
    })
}

fn psnr_pair(noisy: &GrayImage, denoised: &GrayImage, clean: Option<&GrayImage>) -> Result<(Option<f64>, Option<f64>)> {
    match clean {
        Some(c) => Ok((Some(psnr(c, noisy)?), Some(psnr(c, denoised)?))),
        None => Ok((None, None)),
    }
}

fn run_with_selection(
    noisy: &GrayImage,
    cfg: &PipelineConfig,
    clean: Option<&GrayImage>,
    selection: Selection,
) -> Result<(GrayImage, DenoiseReport, Training)> {
    let start = Instant::now();
    let (training, mut timings) = train(noisy, cfg, selection)?;
    let rec = reconstruct(noisy, &training.dictionary, cfg)?;
    timings.code = rec.code_seconds;
    timings.assemble = rec.assemble_seconds;
    timings.total = start.elapsed().as_secs_f64();
    let (psnr_noisy, psnr_denoised) = psnr_pair(noisy, &rec.image, clean)?;
    let report = DenoiseReport {
        psnr_noisy,
        psnr_denoised,
        j_omega: Some(training.cost.total),
        j_omega_non_smooth: Some(training.cost.non_smooth),
        retained_fraction: Some(training.retained_fraction),
        candidate_blocks: Some(training.candidate_blocks),
        training_blocks: Some(training.blocks.len()),
        selection: Some(selection),
        clustering_objective: Some(training.model.objective()),
        cluster_sizes: Some(training.model.sizes.clone()),
        atom_count: training.dictionary.len(),
        coded_blocks: rec.coded_blocks,
        mean_support: rec.mean_support,
        timings,
        config: cfg.resolved(),
    };
    Ok((rec.image, report, training))
}

/// Full pipeline with equalized training selection. PSNR fields are filled
/// when `clean` is given.
pub fn denoise_image(
    noisy: &GrayImage,
    cfg: &PipelineConfig,
    clean: Option<&GrayImage>,
) -> Result<(GrayImage, DenoiseReport)> {
    let (img, report, _) = run_with_selection(noisy, cfg, clean, Selection::Equalized)?;
    Ok((img, report))
}

/// Same as [`denoise_image`], also returning the trained state.
pub fn denoise_image_with_training(
    noisy: &GrayImage,
    cfg: &PipelineConfig,
    clean: Option<&GrayImage>,
) -> Result<(GrayImage, DenoiseReport, Training)> {
    run_with_selection(noisy, cfg, clean, Selection::Equalized)
}

/// Denoises with a previously trained dictionary; training fields stay empty.
pub fn denoise_with_dictionary(
    noisy: &GrayImage,
    dict: &Dictionary,
    cfg: &PipelineConfig,
    clean: Option<&GrayImage>,
) -> Result<(GrayImage, DenoiseReport)> {
    let start = Instant::now();
    let rec = reconstruct(noisy, dict, cfg)?;
    let (psnr_noisy, psnr_denoised) = psnr_pair(noisy, &rec.image, clean)?;
    let timings = StageTimings {
        code: rec.code_seconds,
        assemble: rec.assemble_seconds,
        total: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    let report = DenoiseReport {
        psnr_noisy,
        psnr_denoised,
        j_omega: None,
        j_omega_non_smooth: None,
        retained_fraction: None,
        candidate_blocks: None,
        training_blocks: None,
        selection: None,
        clustering_objective: None,
        cluster_sizes: None,
        atom_count: dict.len(),
        coded_blocks: rec.coded_blocks,
        mean_support: rec.mean_support,
        timings,
        config: cfg.resolved(),
    };
    Ok((rec.image, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionComparison {
    pub equalized: DenoiseReport,
    pub uniform: DenoiseReport,
}

impl SelectionComparison {
    /// Equalized minus uniform denoised PSNR, when both are finite.
    pub fn psnr_gain(&self) -> Option<f64> {
        Some(self.equalized.psnr_denoised? - self.uniform.psnr_denoised?)
    }
}

/// Runs the pipeline twice with identical seeds and training-set sizes:
/// once with equalized selection, once with a uniform random subset.
pub fn compare_selection(noisy: &GrayImage, cfg: &PipelineConfig, clean: &GrayImage) -> Result<SelectionComparison> {
    let (_, equalized, training) = run_with_selection(noisy, cfg, Some(clean), Selection::Equalized)?;
    let count = training.blocks.len();
    let (_, uniform, _) = run_with_selection(noisy, cfg, Some(clean), Selection::Uniform(count))?;
    Ok(SelectionComparison { equalized, uniform })
}
