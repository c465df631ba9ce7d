//! Pipeline configuration, loadable from JSON. Every field is optional in
//! the file and falls back to the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::DEFAULT_MAX_ITERS;
use crate::coder::{CoderConfig, DEFAULT_EPSILON_GAIN};
use crate::dictionary::DictionaryOptions;
use crate::equalization::{EqualizationPolicy, DEFAULT_BINS, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualizationSettings {
    /// Bin-mass level above which blocks are thinned. 1.0 disables equalization.
    pub threshold: f64,
    pub bins: usize,
}

impl Default for EqualizationSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub equalization: u64,
    pub clustering: u64,
    /// Used only by the uniform-random baseline selection.
    pub uniform_selection: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            equalization: 1,
            clustering: 2,
            uniform_selection: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Assumed noise standard deviation.
    pub sigma: f64,
    pub block_size: usize,
    pub denoise_stride: usize,
    pub training_stride: usize,
    /// Number of K-lines clusters.
    pub clusters: usize,
    pub max_iters: usize,
    pub equalization: EqualizationSettings,
    /// Residual budget is `(epsilon_gain * block_size * sigma)^2`.
    pub epsilon_gain: f64,
    /// Defaults to `block_size^2 / 2`.
    pub max_atoms: Option<usize>,
    /// Extra components are kept while eigenvalues exceed `rank_gain * sigma^2`.
    pub rank_gain: f64,
    pub include_dc: bool,
    /// Subtract each training block's mean before clustering. Off by
    /// default: clustering then sees raw blocks, mean included.
    pub center_training_blocks: bool,
    /// Weight of the noisy image in the final average; defaults to `30 / sigma`.
    pub lambda_avg: Option<f64>,
    /// Clusters with no eigenvalue above this are "smooth" in the reported
    /// cost; defaults to `sigma^2`.
    pub smooth_cutoff: Option<f64>,
    pub seeds: Seeds,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma: 20.0,
            block_size: 8,
            denoise_stride: 1,
            training_stride: 4,
            clusters: 64,
            max_iters: DEFAULT_MAX_ITERS,
            equalization: EqualizationSettings::default(),
            epsilon_gain: DEFAULT_EPSILON_GAIN,
            max_atoms: None,
            rank_gain: 1.0,
            include_dc: true,
            center_training_blocks: false,
            lambda_avg: None,
            smooth_cutoff: None,
            seeds: Seeds::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.block_size == 0 {
            return bad("block_size must be >= 1".into());
        }
        if self.denoise_stride == 0 || self.training_stride == 0 {
            return bad("strides must be >= 1".into());
        }
        if self.clusters == 0 {
            return bad("clusters must be >= 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.epsilon_gain >= 0.0) {
            return bad(format!("epsilon_gain must be >= 0, got {}", self.epsilon_gain));
        }
        if self.max_atoms == Some(0) {
            return bad("max_atoms must be >= 1".into());
        }
        if !(self.rank_gain >= 0.0) {
            return bad(format!("rank_gain must be >= 0, got {}", self.rank_gain));
        }
        if let Some(l) = self.lambda_avg {
            if !(l >= 0.0) {
                return bad(format!("lambda_avg must be >= 0, got {l}"));
            }
        }
        self.equalization_policy().validate()
    }

    pub fn lambda_avg(&self) -> f64 {
        self.lambda_avg.unwrap_or(30.0 / self.sigma)
    }

    pub fn max_atoms(&self) -> usize {
        self.max_atoms
            .unwrap_or((self.block_size * self.block_size / 2).max(1))
    }

    pub fn smooth_cutoff(&self) -> f64 {
        self.smooth_cutoff.unwrap_or(self.sigma * self.sigma)
    }

    pub fn equalization_policy(&self) -> EqualizationPolicy {
        EqualizationPolicy {
            threshold: self.equalization.threshold,
            bins: self.equalization.bins,
            seed: self.seeds.equalization,
        }
    }

    pub fn coder_config(&self) -> Result<CoderConfig> {
        CoderConfig::for_noise(self.block_size, self.sigma, self.epsilon_gain, self.max_atoms())
    }

    pub fn dictionary_options(&self) -> DictionaryOptions {
        DictionaryOptions {
            include_dc: self.include_dc,
            rank_gain: self.rank_gain,
        }
    }

    /// Copy with every derived default written out explicitly.
    pub fn resolved(&self) -> Self {
        Self {
            max_atoms: Some(self.max_atoms()),
            lambda_avg: Some(self.lambda_avg()),
            smooth_cutoff: Some(self.smooth_cutoff()),
            ..self.clone()
        }
    }
}
