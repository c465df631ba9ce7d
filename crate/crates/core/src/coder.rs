//! Error-constrained orthogonal matching pursuit over a [`Dictionary`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Default noise gain in the residual budget `(gain * n * sigma)^2`.
pub const DEFAULT_EPSILON_GAIN: f64 = 1.15;

/// Pivot below this fraction of the atom's own energy means the atom is
/// already in the span of the support.
const DEPENDENCE_TOL: f64 = 1e-12;
/// Minimum relative residual reduction for an atom to be accepted.
const MIN_REDUCTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoderConfig {
    /// Residual energy budget, squared luminance units.
    pub epsilon: f64,
    pub max_atoms: usize,
}

impl CoderConfig {
    pub fn new(epsilon: f64, max_atoms: usize) -> Result<Self> {
        let cfg = Self { epsilon, max_atoms };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Budget for `block_side`x`block_side` blocks under noise `sigma`.
    pub fn for_noise(block_side: usize, sigma: f64, gain: f64, max_atoms: usize) -> Result<Self> {
        let e = gain * block_side as f64 * sigma;
        Self::new(e * e, max_atoms)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.max_atoms == 0 {
            return Err(Error::InvalidParameter("max_atoms must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `||y - D alpha||^2` at termination.
    pub residual_norm_sq: f64,
}

impl SparseCode {
    /// `D alpha` over the support.
    pub fn reconstruct(&self, dict: &Dictionary) -> Vec<f64> {
        let mut out = vec![0.0; dict.dim()];
        for (&j, &a) in self.support.iter().zip(&self.coefficients) {
            for (o, d) in out.iter_mut().zip(dict.atoms.column(j).iter()) {
                *o += a * d;
            }
        }
        out
    }
}

/// Pursuit engine with the dictionary Gram matrix precomputed.
#[derive(Debug, Clone)]
pub struct Coder<'a> {
    dict: &'a Dictionary,
    gram: DMatrix<f64>,
    cfg: CoderConfig,
}

impl<'a> Coder<'a> {
    pub fn new(dict: &'a Dictionary, cfg: CoderConfig) -> Result<Self> {
        cfg.validate()?;
        let gram = dict.atoms.transpose() * &dict.atoms;
        Ok(Self { dict, gram, cfg })
    }

    pub fn config(&self) -> &CoderConfig {
        &self.cfg
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dict.dim() {
            return Err(Error::DimensionMismatch(format!(
                "block of length {} for atoms of length {}",
                y.len(),
                self.dict.dim()
            )));
        }
        Ok(())
    }

    pub fn code(&self, y: &[f64]) -> Result<SparseCode> {
        self.check_dim(y)?;
        let corr: Vec<f64> = self.dict.atoms.tr_mul(&nalgebra::DVector::from_column_slice(y)).data.into();
        Ok(self.pursue(y, &corr, None))
    }

    /// Like [`Coder::code`], also returning the residual energy before the
    /// first step and after every accepted atom.
    pub fn code_traced(&self, y: &[f64]) -> Result<(SparseCode, Vec<f64>)> {
        self.check_dim(y)?;
        let corr: Vec<f64> = self.dict.atoms.tr_mul(&nalgebra::DVector::from_column_slice(y)).data.into();
        let mut trace = Vec::new();
        let code = self.pursue(y, &corr, Some(&mut trace));
        Ok((code, trace))
    }

    /// Codes a block whose atom correlations `D^T y` are already known.
    pub fn code_with_correlations(&self, y: &[f64], dty: &[f64]) -> SparseCode {
        self.pursue(y, dty, None)
    }

    /// Orthogonal projection of `y` on the atoms its code selects.
    pub fn denoise(&self, y: &[f64]) -> Result<Vec<f64>> {
        let code = self.code(y)?;
        Ok(code.reconstruct(self.dict))
    }

    fn residual(&self, y: &[f64], support: &[usize], coeffs: &[f64], out: &mut [f64]) -> f64 {
        out.copy_from_slice(y);
        for (&j, &a) in support.iter().zip(coeffs) {
            for (o, d) in out.iter_mut().zip(self.dict.atoms.column(j).iter()) {
                *o -= a * d;
            }
        }
        out.iter().map(|v| v * v).sum()
    }

    fn pursue(&self, y: &[f64], dty: &[f64], mut trace: Option<&mut Vec<f64>>) -> SparseCode {
        let m = self.dict.len();
        let limit = self.cfg.max_atoms.min(m).min(self.dict.dim());
        let mut energy: f64 = y.iter().map(|v| v * v).sum();
        if let Some(t) = trace.as_deref_mut() {
            t.push(energy);
        }
        let mut support: Vec<usize> = Vec::with_capacity(limit);
        let mut coeffs: Vec<f64> = Vec::new();
        if energy <= self.cfg.epsilon {
            return SparseCode {
                support,
                coefficients: coeffs,
                residual_norm_sq: energy,
            };
        }

        // Row-major lower-triangular Cholesky factor of the support Gram matrix.
        let mut chol = vec![0.0; limit * limit];
        let mut corr = dty.to_vec();
        let mut in_support = vec![false; m];
        let mut resid = vec![0.0; y.len()];
        let mut w = vec![0.0; limit];

        while support.len() < limit {
            let mut best = None;
            let mut best_abs = 0.0;
            for (j, &c) in corr.iter().enumerate() {
                if !in_support[j] && c.abs() > best_abs {
                    best_abs = c.abs();
                    best = Some(j);
                }
            }
            let Some(j) = best else { break };

            let k = support.len();
            for (i, &s) in support.iter().enumerate() {
                let mut v = self.gram[(s, j)];
                for t in 0..i {
                    v -= chol[i * limit + t] * w[t];
                }
                w[i] = v / chol[i * limit + i];
            }
            let gjj = self.gram[(j, j)];
            let pivot = gjj - w[..k].iter().map(|v| v * v).sum::<f64>();
            if pivot <= DEPENDENCE_TOL * gjj {
                break;
            }
            chol[k * limit..k * limit + k].copy_from_slice(&w[..k]);
            chol[k * limit + k] = pivot.sqrt();
            support.push(j);

            let new_coeffs = solve_cholesky(&chol, limit, &support.iter().map(|&s| dty[s]).collect::<Vec<_>>());
            let new_energy = self.residual(y, &support, &new_coeffs, &mut resid);
            if energy - new_energy <= MIN_REDUCTION * energy {
                support.pop();
                break;
            }
            in_support[j] = true;
            coeffs = new_coeffs;
            energy = new_energy;
            if let Some(t) = trace.as_deref_mut() {
                t.push(energy);
            }
            if energy <= self.cfg.epsilon {
                break;
            }
            corr.copy_from_slice(dty);
            for (&s, &a) in support.iter().zip(&coeffs) {
                for (c, g) in corr.iter_mut().zip(self.gram.column(s).iter()) {
                    *c -= a * g;
                }
            }
        }

        SparseCode {
            support,
            coefficients: coeffs,
            residual_norm_sq: energy,
        }
    }
}

/// Solves `L L^T x = b` for the leading `b.len()` rows of a row-major factor with stride `stride`.
fn solve_cholesky(chol: &[f64], stride: usize, b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut v = b[i];
        for t in 0..i {
            v -= chol[i * stride + t] * z[t];
        }
        z[i] = v / chol[i * stride + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut v = z[i];
        for t in i + 1..k {
            v -= chol[t * stride + i] * x[t];
        }
        x[i] = v / chol[i * stride + i];
    }
    x
}

/// Sparse-codes one block; builds a throwaway [`Coder`].
pub fn sparse_code(y: &[f64], dict: &Dictionary, cfg: &CoderConfig) -> Result<SparseCode> {
    Coder::new(dict, *cfg)?.code(y)
}

/// Projection of `y` on the atoms selected by its sparse code.
pub fn denoise_block(y: &[f64], dict: &Dictionary, cfg: &CoderConfig) -> Result<Vec<f64>> {
    Coder::new(dict, *cfg)?.denoise(y)
}
