//! Per-cluster spectra and the clustering cost built from the MSE lower bound
//! `(s^2/N) sum_j lambda_j / (lambda_j + s^2/N)`.

use nalgebra::DMatrix;

use super::{sorted_symmetric_eigen, ClusterKind, ClusterModel};
use crate::error::{Error, Result};

/// Spectrum of one nonempty cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEigen {
    pub cluster: usize,
    pub size: usize,
    /// Descending eigenvalues of the noisy member second-moment matrix
    /// (centered for centroid clusters).
    pub noisy_eigenvalues: Vec<f64>,
    /// `max(noisy - sigma^2, 0)`, descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors aligned with `eigenvalues`; empty when the
    /// spectrum was rebuilt from stored eigenvalues only.
    pub principal_directions: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpectrum {
    pub clusters: Vec<ClusterEigen>,
    /// Indices of clusters without members; they have no spectrum.
    pub empty: Vec<usize>,
}

/// Eigen-analysis of every cluster: `(1/N_i) Y_i Y_i^T`, minus `sigma^2`,
/// clamped at zero. Centroid clusters are centered first.
pub fn cluster_spectrum(data: &DMatrix<f64>, model: &ClusterModel, sigma: f64) -> Result<ClusterSpectrum> {
    model.validate(Some(data))?;
    let sigma_sq = sigma * sigma;
    let mut clusters = Vec::new();
    let mut empty = Vec::new();
    for (c, idx) in model.members().into_iter().enumerate() {
        if idx.is_empty() {
            empty.push(c);
            continue;
        }
        let mut y = data.select_columns(idx.iter());
        if model.kind == ClusterKind::Centroid {
            let mean = y.column_mean();
            for mut col in y.column_iter_mut() {
                col -= &mean;
            }
        }
        let moment = (&y * y.transpose()) / idx.len() as f64;
        let (noisy, vecs) = sorted_symmetric_eigen(moment);
        // Rounding can leave tiny negative eigenvalues of a PSD matrix.
        let noisy: Vec<f64> = noisy.into_iter().map(|v| v.max(0.0)).collect();
        let eigenvalues = noisy.iter().map(|v| (v - sigma_sq).max(0.0)).collect();
        clusters.push(ClusterEigen {
            cluster: c,
            size: idx.len(),
            noisy_eigenvalues: noisy,
            eigenvalues,
            principal_directions: vecs,
        });
    }
    Ok(ClusterSpectrum { clusters, empty })
}

/// Rebuilds a spectrum from stored noisy eigenvalues (`None` marks an empty cluster).
pub fn spectrum_from_moments(
    noisy: &[Option<Vec<f64>>],
    sizes: &[usize],
    sigma: f64,
) -> Result<ClusterSpectrum> {
    if noisy.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalue lists for {} clusters",
            noisy.len(),
            sizes.len()
        )));
    }
    let sigma_sq = sigma * sigma;
    let mut clusters = Vec::new();
    let mut empty = Vec::new();
    for (c, (eigs, &size)) in noisy.iter().zip(sizes).enumerate() {
        match eigs {
            Some(eigs) if size > 0 => {
                let mut sorted = eigs.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                clusters.push(ClusterEigen {
                    cluster: c,
                    size,
                    eigenvalues: sorted.iter().map(|v| (v - sigma_sq).max(0.0)).collect(),
                    noisy_eigenvalues: sorted,
                    principal_directions: DMatrix::zeros(0, 0),
                });
            }
            _ => empty.push(c),
        }
    }
    Ok(ClusterSpectrum { clusters, empty })
}

/// Lower bound on the per-block MSE achievable inside one cluster of
/// `members` blocks of side `block_side`. Only the first `block_side^2`
/// eigenvalues count; missing ones are zero.
pub fn cluster_mse_bound(lambdas: &[f64], members: usize, sigma: f64, block_side: usize) -> f64 {
    let slots = (block_side * block_side).min(lambdas.len());
    bound_terms(&lambdas[..slots], members, sigma)
}

fn bound_terms(lambdas: &[f64], members: usize, sigma: f64) -> f64 {
    let s = sigma * sigma / members as f64;
    let sum: f64 = lambdas
        .iter()
        .map(|&l| if l.is_infinite() { 1.0 } else { l / (l + s) })
        .sum();
    s * sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringCost {
    /// Sum of the per-cluster bounds over all nonempty clusters.
    pub total: f64,
    /// Same sum restricted to clusters with some eigenvalue above the smoothness cutoff.
    pub non_smooth: f64,
    pub smooth_clusters: usize,
}

/// Scores a clustering by the summed per-cluster MSE bounds. A cluster whose
/// eigenvalues all sit at or below `smooth_cutoff` counts as smooth and is
/// left out of `non_smooth`.
pub fn clustering_cost(spectrum: &ClusterSpectrum, sigma: f64, smooth_cutoff: f64) -> Result<ClusteringCost> {
    if spectrum.clusters.is_empty() {
        return Err(Error::Empty("clustering cost needs a nonempty cluster"));
    }
    let mut cost = ClusteringCost {
        total: 0.0,
        non_smooth: 0.0,
        smooth_clusters: 0,
    };
    for c in &spectrum.clusters {
        let b = bound_terms(&c.eigenvalues, c.size, sigma);
        cost.total += b;
        if c.eigenvalues.iter().any(|&l| l > smooth_cutoff) {
            cost.non_smooth += b;
        } else {
            cost.smooth_clusters += 1;
        }
    }
    Ok(cost)
}
