//! K-means and gain-shaped K-means (K-lines) clustering of block vectors,
//! plus the per-cluster MSE lower bound used to score a clustering.

mod bound;
mod kmeans;
mod klines;
mod model;

pub use bound::{
    cluster_mse_bound, cluster_spectrum, clustering_cost, spectrum_from_moments, ClusterEigen,
    ClusterSpectrum, ClusteringCost,
};
pub use kmeans::kmeans;
pub use klines::klines;
pub use model::{BlockMatrixDoc, ClusterKind, ClusterModel, ClusterModelDoc};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Shared knobs for both Lloyd-style solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the relative objective drop falls below this.
    pub tolerance: f64,
    /// Independent seeded runs; the lowest final objective wins.
    pub restarts: usize,
}

impl ClusterConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: DEFAULT_MAX_ITERS,
            seed,
            tolerance: DEFAULT_TOLERANCE,
            restarts: 1,
        }
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        Self { restarts, ..self }
    }

    pub fn with_max_iters(self, max_iters: usize) -> Self {
        Self { max_iters, ..self }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }

    fn validate(&self, data: &DMatrix<f64>) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
        }
        if data.ncols() == 0 {
            return Err(Error::Empty("clustering needs at least one data column"));
        }
        if self.k > data.ncols() {
            return Err(Error::TooManyClusters {
                k: self.k,
                n: data.ncols(),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Runs `solve` once per restart with derived seeds and keeps the best model.
fn best_of_restarts(
    cfg: &ClusterConfig,
    mut solve: impl FnMut(u64) -> ClusterModel,
) -> ClusterModel {
    let mut best: Option<ClusterModel> = None;
    for r in 0..cfg.restarts {
        let seed = cfg.seed.wrapping_add((r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let model = solve(seed);
        // Strict comparison: ties keep the earlier restart.
        if best.as_ref().is_none_or(|b| model.objective() < b.objective()) {
            best = Some(model);
        }
    }
    best.expect("restarts >= 1")
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index drawn with probability proportional to `weights`; `None` when all weights are zero.
fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    let mut fallback = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            fallback = Some(i);
            if target < w {
                return Some(i);
            }
            target -= w;
        }
    }
    fallback
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
/// Each eigenvector's largest-magnitude entry is made positive.
pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        canonical_sign(v.as_mut_slice());
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Index of the maximum, lowest index on ties.
#[inline]
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn converged(trace: &[f64], tolerance: f64) -> bool {
    match trace {
        [.., prev, last] => {
            let drop = prev - last;
            drop <= tolerance * prev.abs().max(f64::MIN_POSITIVE)
        }
        _ => false,
    }
}
