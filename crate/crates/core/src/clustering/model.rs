use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKind {
    /// Flat centroids, plain K-means.
    Centroid,
    /// Unit-norm line directions through the origin, gain-shaped K-means.
    Line,
}

/// A partition of training columns into `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub kind: ClusterKind,
    /// One column per cluster: centroid or unit direction.
    pub directions: DMatrix<f64>,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Objective after each iteration; the last entry belongs to the final
    /// `(directions, assignments)` pair.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.directions.ncols()
    }

    pub fn dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Column indices of each cluster's members, in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (j, &a) in self.assignments.iter().enumerate() {
            out[a].push(j);
        }
        out
    }

    /// Checks internal consistency and, if given, agreement with `data`.
    pub fn validate(&self, data: Option<&DMatrix<f64>>) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidParameter("model has no clusters".into()));
        }
        if self.sizes.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} sizes for {k} clusters",
                self.sizes.len()
            )));
        }
        let mut counted = vec![0usize; k];
        for &a in &self.assignments {
            if a >= k {
                return Err(Error::InvalidParameter(format!(
                    "assignment {a} out of range for {k} clusters"
                )));
            }
            counted[a] += 1;
        }
        if counted != self.sizes {
            return Err(Error::InvalidParameter(
                "cluster sizes disagree with assignments".into(),
            ));
        }
        if let Some(data) = data {
            if data.ncols() != self.assignments.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} data columns for {} assignments",
                    data.ncols(),
                    self.assignments.len()
                )));
            }
            if data.nrows() != self.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "data dimension {} vs model dimension {}",
                    data.nrows(),
                    self.dim()
                )));
            }
        }
        Ok(())
    }
}

/// JSON form of a [`ClusterModel`].
///
/// `second_moment_eigenvalues`, when present, holds for each cluster the
/// descending eigenvalues of the noisy member second-moment matrix (`null`
/// for empty clusters). It lets the clustering cost be evaluated without
/// the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModelDoc {
    pub kind: ClusterKind,
    pub dim: usize,
    /// `k` arrays of length `dim`.
    pub directions: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_moment_eigenvalues: Option<Vec<Option<Vec<f64>>>>,
}

impl ClusterModelDoc {
    pub fn from_model(model: &ClusterModel) -> Self {
        Self {
            kind: model.kind,
            dim: model.dim(),
            directions: model
                .directions
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            assignments: model.assignments.clone(),
            sizes: model.sizes.clone(),
            objective_trace: model.objective_trace.clone(),
            second_moment_eigenvalues: None,
        }
    }

    pub fn to_model(&self) -> Result<ClusterModel> {
        if self.directions.iter().any(|d| d.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "every direction must have {} entries",
                self.dim
            )));
        }
        let flat: Vec<f64> = self.directions.iter().flatten().copied().collect();
        let model = ClusterModel {
            kind: self.kind,
            directions: DMatrix::from_vec(self.dim, self.directions.len(), flat),
            assignments: self.assignments.clone(),
            sizes: self.sizes.clone(),
            objective_trace: self.objective_trace.clone(),
        };
        model.validate(None)?;
        if let Some(eigs) = &self.second_moment_eigenvalues {
            if eigs.len() != model.k() {
                return Err(Error::DimensionMismatch(format!(
                    "{} eigenvalue lists for {} clusters",
                    eigs.len(),
                    model.k()
                )));
            }
        }
        Ok(model)
    }
}

/// JSON form of a block matrix: `columns` holds one vector of length `dim` per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrixDoc {
    pub dim: usize,
    pub columns: Vec<Vec<f64>>,
}

impl BlockMatrixDoc {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            dim: m.nrows(),
            columns: m.column_iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.columns.iter().any(|c| c.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "every column must have {} entries",
                self.dim
            )));
        }
        let flat: Vec<f64> = self.columns.iter().flatten().copied().collect();
        Ok(DMatrix::from_vec(self.dim, self.columns.len(), flat))
    }
}
