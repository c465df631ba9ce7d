//! Grayscale image denoising with a global dictionary learned by
//! gain-shaped K-means (K-lines) on variance-equalized training blocks.
//!
//! Stages, each usable on its own:
//!
//! 1. [`patching`] cuts the noisy image into overlapping blocks.
//! 2. [`equalization`] thins the training blocks so no variance level dominates.
//! 3. [`clustering`] groups them into rank-1 subspaces and scores clusterings.
//! 4. [`dictionary`] keeps each cluster's principal components above the noise floor.
//! 5. [`coder`] sparse-codes every block and projects it on the chosen atoms.
//! 6. [`pipeline`] runs the whole chain and averages the block estimates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod coder;
pub mod config;
pub mod dictionary;
pub mod equalization;
pub mod error;
pub mod image;
pub mod noise;
pub mod patching;
pub mod pgm;
pub mod pipeline;

pub use config::PipelineConfig;
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use image::{psnr, GrayImage};
pub use noise::{add_awgn, NoiseSpec};
pub use pipeline::{compare_selection, denoise_image, DenoiseReport};
