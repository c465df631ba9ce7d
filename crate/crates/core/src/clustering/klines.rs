//! Gain-shaped K-means: every cluster is a line through the origin and a
//! column joins the line with the largest `|d_k^T y|`.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    argmax, best_of_restarts, canonical_sign, converged, rng_for, sorted_symmetric_eigen,
    weighted_pick, ClusterConfig, ClusterKind, ClusterModel,
};
use crate::error::Result;

/// Alternates nearest-line assignment with a rank-1 refit of each line to
/// its members (the dominant left singular vector of the member matrix).
pub fn klines(data: &DMatrix<f64>, cfg: &ClusterConfig) -> Result<ClusterModel> {
    cfg.validate(data)?;
    Ok(best_of_restarts(cfg, |seed| run(data, cfg, seed)))
}

fn run(data: &DMatrix<f64>, cfg: &ClusterConfig, seed: u64) -> ClusterModel {
    let n = data.ncols();
    let energy: Vec<f64> = data.column_iter().map(|c| c.norm_squared()).collect();
    let mut rng = rng_for(seed);
    let mut dirs = seed_lines(data, &energy, cfg.k, &mut rng);
    let mut assign = vec![usize::MAX; n];
    let mut residuals = vec![0.0; n];
    let mut trace = Vec::new();

    for iter in 0..cfg.max_iters {
        let changed = assign_step(data, &dirs, &mut assign, &mut residuals);
        trace.push(residuals.iter().sum::<f64>());
        if !changed || converged(&trace, cfg.tolerance) || iter + 1 == cfg.max_iters {
            break;
        }
        update_step(data, &assign, Some(&residuals), &mut dirs);
    }

    // Refit lines to the final partition without reassigning.
    let mut refit = dirs.clone();
    update_step(data, &assign, None, &mut refit);
    let refit_obj = objective(data, &refit, &assign);
    if refit_obj < *trace.last().unwrap() {
        dirs = refit;
        trace.push(refit_obj);
    }

    let mut sizes = vec![0; cfg.k];
    for &a in &assign {
        sizes[a] += 1;
    }
    ClusterModel {
        kind: ClusterKind::Line,
        directions: dirs,
        assignments: assign,
        sizes,
        objective_trace: trace,
    }
}

/// Residual energy of `y` after projecting on the unit line `d`.
#[inline]
fn line_residual(y: &[f64], d: &[f64]) -> f64 {
    let g: f64 = y.iter().zip(d).map(|(a, b)| a * b).sum();
    y.iter().zip(d).map(|(a, b)| (a - g * b).powi(2)).sum()
}

/// `sum_j ||y_j - d_a (d_a^T y_j)||^2` for the given assignment.
pub(crate) fn objective(data: &DMatrix<f64>, dirs: &DMatrix<f64>, assign: &[usize]) -> f64 {
    data.column_iter()
        .zip(assign)
        .map(|(y, &a)| line_residual(y.as_slice(), dirs.column(a).as_slice()))
        .sum()
}

fn unit_or_axis(v: DVector<f64>, axis: usize) -> DVector<f64> {
    let norm = v.norm();
    if norm > 0.0 {
        let mut u = v / norm;
        canonical_sign(u.as_mut_slice());
        u
    } else {
        let mut e = DVector::zeros(v.len());
        e[axis % v.len()] = 1.0;
        e
    }
}

/// Energy-weighted seeding in the spirit of k-means++: each new line goes
/// through a column drawn in proportion to its residual to the lines so far.
fn seed_lines(data: &DMatrix<f64>, energy: &[f64], k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let dim = data.nrows();
    let n = data.ncols();
    let mut dirs = DMatrix::zeros(dim, k);
    let mut best_res = energy.to_vec();
    let mut used = vec![false; n];
    for slot in 0..k {
        let pick = weighted_pick(rng, &best_res).unwrap_or_else(|| {
            // Every column already lies on a chosen line.
            (0..n).find(|&j| !used[j]).unwrap_or(slot % n)
        });
        used[pick] = true;
        let d = unit_or_axis(data.column(pick).clone_owned(), slot);
        for (j, r) in best_res.iter_mut().enumerate() {
            let res = line_residual(data.column(j).as_slice(), d.as_slice());
            if res < *r {
                *r = res;
            }
        }
        best_res[pick] = 0.0;
        dirs.set_column(slot, &d);
    }
    dirs
}

/// Assigns each column to its best line; returns whether anything moved.
fn assign_step(
    data: &DMatrix<f64>,
    dirs: &DMatrix<f64>,
    assign: &mut [usize],
    residuals: &mut [f64],
) -> bool {
    let gains = dirs.transpose() * data;
    let picks: Vec<(usize, f64)> = (0..data.ncols())
        .into_par_iter()
        .map(|j| {
            let (k, _) = argmax(gains.column(j).iter().map(|g| g.abs()));
            let res = line_residual(data.column(j).as_slice(), dirs.column(k).as_slice());
            (k, res)
        })
        .collect();
    let mut changed = false;
    for (j, (k, res)) in picks.into_iter().enumerate() {
        changed |= assign[j] != k;
        assign[j] = k;
        residuals[j] = res;
    }
    changed
}

/// Replaces each occupied line by its members' dominant singular direction.
/// With `residuals`, empty clusters are reseeded on the worst-fit columns.
fn update_step(
    data: &DMatrix<f64>,
    assign: &[usize],
    residuals: Option<&[f64]>,
    dirs: &mut DMatrix<f64>,
) {
    let k = dirs.ncols();
    let mut members = vec![Vec::new(); k];
    for (j, &a) in assign.iter().enumerate() {
        members[a].push(j);
    }
    let updates: Vec<Option<DVector<f64>>> = members
        .par_iter()
        .map(|idx| {
            if idx.is_empty() {
                return None;
            }
            let y = data.select_columns(idx.iter());
            let moment = &y * y.transpose();
            if moment.iter().all(|&v| v == 0.0) {
                return None;
            }
            let (_, vecs) = sorted_symmetric_eigen(moment);
            Some(vecs.column(0).clone_owned())
        })
        .collect();
    for (c, u) in updates.into_iter().enumerate() {
        if let Some(u) = u {
            dirs.set_column(c, &u);
        }
    }

    if let Some(residuals) = residuals {
        let empty: Vec<usize> = (0..k).filter(|&c| members[c].is_empty()).collect();
        if empty.is_empty() {
            return;
        }
        let mut worst: Vec<usize> = (0..data.ncols()).collect();
        worst.sort_by(|&a, &b| residuals[b].total_cmp(&residuals[a]).then(a.cmp(&b)));
        for (c, &j) in empty.iter().zip(&worst) {
            if residuals[j] > 0.0 {
                let d = unit_or_axis(data.column(j).clone_owned(), *c);
                dirs.set_column(*c, &d);
            }
        }
    }
}
