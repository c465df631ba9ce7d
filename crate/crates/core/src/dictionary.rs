//! Global dictionary assembled from per-cluster principal components.
//!
//! Each nonempty cluster contributes its first principal component plus one
//! more for every eigenvalue (after noise subtraction) above the noise
//! variance.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::clustering::{canonical_sign, ClusterModel};
use crate::error::{Error, Result};

/// Where an atom came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSource {
    /// `None` for the constant atom.
    pub cluster: Option<usize>,
    /// Component rank within the cluster, 0 = dominant.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    /// Unit-norm atoms, one per column.
    pub atoms: DMatrix<f64>,
    pub provenance: Vec<AtomSource>,
    pub includes_dc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryOptions {
    pub include_dc: bool,
    /// Multiplies the noise variance in the rank threshold.
    pub rank_gain: f64,
}

impl Default for DictionaryOptions {
    fn default() -> Self {
        Self {
            include_dc: true,
            rank_gain: 1.0,
        }
    }
}

impl Dictionary {
    /// Builds a dictionary from explicit atoms; columns are normalized.
    pub fn from_atoms(mut atoms: DMatrix<f64>, provenance: Vec<AtomSource>, includes_dc: bool) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::Empty("dictionary needs at least one atom"));
        }
        if provenance.len() != atoms.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} provenance entries for {} atoms",
                provenance.len(),
                atoms.ncols()
            )));
        }
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidParameter(format!("atom {j} has zero or invalid norm")));
            }
            col /= norm;
        }
        Ok(Self {
            atoms,
            provenance,
            includes_dc,
        })
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    /// Side of the square block the atoms describe, if `dim` is a perfect square.
    pub fn block_size(&self) -> Option<usize> {
        let side = (self.dim() as f64).sqrt().round() as usize;
        (side * side == self.dim()).then_some(side)
    }

    /// Atom indices contributed by `cluster`, in rank order.
    pub fn cluster_atoms(&self, cluster: usize) -> Vec<usize> {
        self.provenance
            .iter()
            .enumerate()
            .filter(|(_, p)| p.cluster == Some(cluster))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Number of eigenvalues strictly above `sigma_sq`.
pub fn select_rank(lambdas: &[f64], sigma_sq: f64) -> usize {
    lambdas.iter().filter(|&&l| l > sigma_sq).count()
}

/// Constant unit atom of dimension `dim`.
pub fn dc_atom(dim: usize) -> DVector<f64> {
    DVector::from_element(dim, 1.0 / (dim as f64).sqrt())
}

/// Left singular vectors and singular values of `y`, sorted descending.
fn sorted_left_svd(y: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = SVD::new(y, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut vecs = DMatrix::zeros(u.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut v = u.column(src).clone_owned();
        canonical_sign(v.as_mut_slice());
        vecs.set_column(dst, &v);
    }
    (values, vecs)
}

/// Principal components kept for one cluster: `1 + P_i`, capped by the
/// numerical rank of the member matrix.
fn cluster_atoms(y: DMatrix<f64>, sigma: f64, rank_gain: f64) -> DMatrix<f64> {
    let members = y.ncols() as f64;
    let dim = y.nrows();
    let (singular, vecs) = sorted_left_svd(y);
    let top = singular.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return DMatrix::zeros(dim, 0);
    }
    let sigma_sq = sigma * sigma;
    let lambdas: Vec<f64> = singular
        .iter()
        .map(|s| (s * s / members - sigma_sq).max(0.0))
        .collect();
    let extra = select_rank(&lambdas, rank_gain * sigma_sq);
    let tol = top * dim.max(singular.len()) as f64 * f64::EPSILON;
    let numerical_rank = singular.iter().filter(|&&s| s > tol).count();
    let keep = (1 + extra).min(numerical_rank).min(vecs.ncols());
    vecs.columns(0, keep).clone_owned()
}

/// Builds the dictionary from the members of each cluster of `model`.
/// Clusters with no members, or only zero members, contribute nothing.
pub fn build_dictionary(
    data: &DMatrix<f64>,
    model: &ClusterModel,
    sigma: f64,
    opts: &DictionaryOptions,
) -> Result<Dictionary> {
    model.validate(Some(data))?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let members = model.members();
    if members.iter().all(|m| m.is_empty()) {
        return Err(Error::AllClustersEmpty);
    }
    let dim = data.nrows();
    let per_cluster: Vec<DMatrix<f64>> = {
        use rayon::prelude::*;
        members
            .par_iter()
            .map(|idx| {
                if idx.is_empty() {
                    DMatrix::zeros(dim, 0)
                } else {
                    cluster_atoms(data.select_columns(idx.iter()), sigma, opts.rank_gain)
                }
            })
            .collect()
    };

    let total = usize::from(opts.include_dc) + per_cluster.iter().map(|a| a.ncols()).sum::<usize>();
    let mut atoms = DMatrix::zeros(dim, total);
    let mut provenance = Vec::with_capacity(total);
    let mut col = 0;
    if opts.include_dc {
        atoms.set_column(0, &dc_atom(dim));
        provenance.push(AtomSource {
            cluster: None,
            rank: 0,
        });
        col += 1;
    }
    for (c, block) in per_cluster.iter().enumerate() {
        for r in 0..block.ncols() {
            atoms.set_column(col, &block.column(r));
            provenance.push(AtomSource {
                cluster: Some(c),
                rank: r,
            });
            col += 1;
        }
    }
    Dictionary::from_atoms(atoms, provenance, opts.include_dc)
}

/// JSON form of a [`Dictionary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<usize>,
    pub dim: usize,
    pub includes_dc: bool,
    /// One array of length `dim` per atom.
    pub atoms: Vec<Vec<f64>>,
    pub provenance: Vec<AtomSource>,
}

impl DictionaryDoc {
    pub fn from_dictionary(dict: &Dictionary) -> Self {
        Self {
            block_size: dict.block_size(),
            dim: dict.dim(),
            includes_dc: dict.includes_dc,
            atoms: dict
                .atoms
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            provenance: dict.provenance.clone(),
        }
    }

    pub fn to_dictionary(&self) -> Result<Dictionary> {
        if let Some(n) = self.block_size {
            if n * n != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "block size {n} does not match dimension {}",
                    self.dim
                )));
            }
        }
        if self.atoms.iter().any(|a| a.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "every atom must have {} entries",
                self.dim
            )));
        }
        let flat: Vec<f64> = self.atoms.iter().flatten().copied().collect();
        let atoms = DMatrix::from_vec(self.dim, self.atoms.len(), flat);
        Dictionary::from_atoms(atoms, self.provenance.clone(), self.includes_dc)
    }
}
