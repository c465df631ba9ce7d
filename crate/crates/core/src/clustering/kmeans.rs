//! Plain Lloyd K-means with k-means++ seeding.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    best_of_restarts, converged, rng_for, weighted_pick, ClusterConfig, ClusterKind,
    ClusterModel,
};
use crate::error::Result;

pub fn kmeans(data: &DMatrix<f64>, cfg: &ClusterConfig) -> Result<ClusterModel> {
    cfg.validate(data)?;
    Ok(best_of_restarts(cfg, |seed| run(data, cfg, seed)))
}

fn run(data: &DMatrix<f64>, cfg: &ClusterConfig, seed: u64) -> ClusterModel {
    let n = data.ncols();
    let mut rng = rng_for(seed);
    let mut centroids = seed_centroids(data, cfg.k, &mut rng);
    let mut assign = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();

    for iter in 0..cfg.max_iters {
        let changed = assign_step(data, &centroids, &mut assign, &mut dists);
        trace.push(dists.iter().sum::<f64>());
        if !changed || converged(&trace, cfg.tolerance) || iter + 1 == cfg.max_iters {
            break;
        }
        update_step(data, &assign, Some(&dists), &mut centroids);
    }

    let mut refit = centroids.clone();
    update_step(data, &assign, None, &mut refit);
    let refit_obj = objective(data, &refit, &assign);
    if refit_obj < *trace.last().unwrap() {
        centroids = refit;
        trace.push(refit_obj);
    }

    let mut sizes = vec![0; cfg.k];
    for &a in &assign {
        sizes[a] += 1;
    }
    ClusterModel {
        kind: ClusterKind::Centroid,
        directions: centroids,
        assignments: assign,
        sizes,
        objective_trace: trace,
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn objective(data: &DMatrix<f64>, centroids: &DMatrix<f64>, assign: &[usize]) -> f64 {
    data.column_iter()
        .zip(assign)
        .map(|(y, &a)| sq_dist(y.as_slice(), centroids.column(a).as_slice()))
        .sum()
}

fn seed_centroids(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = data.ncols();
    let mut centroids = DMatrix::zeros(data.nrows(), k);
    let mut best = vec![1.0; n];
    let mut used = vec![false; n];
    for slot in 0..k {
        let pick = weighted_pick(rng, &best)
            .unwrap_or_else(|| (0..n).find(|&j| !used[j]).unwrap_or(slot % n));
        used[pick] = true;
        let c = data.column(pick).clone_owned();
        for (j, b) in best.iter_mut().enumerate() {
            let d = sq_dist(data.column(j).as_slice(), c.as_slice());
            if slot == 0 || d < *b {
                *b = d;
            }
        }
        centroids.set_column(slot, &c);
    }
    centroids
}

fn assign_step(
    data: &DMatrix<f64>,
    centroids: &DMatrix<f64>,
    assign: &mut [usize],
    dists: &mut [f64],
) -> bool {
    let picks: Vec<(usize, f64)> = (0..data.ncols())
        .into_par_iter()
        .map(|j| {
            let y = data.column(j);
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.column_iter().enumerate() {
                let d = sq_dist(y.as_slice(), centroid.as_slice());
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect();
    let mut changed = false;
    for (j, (c, d)) in picks.into_iter().enumerate() {
        changed |= assign[j] != c;
        assign[j] = c;
        dists[j] = d;
    }
    changed
}

fn update_step(
    data: &DMatrix<f64>,
    assign: &[usize],
    dists: Option<&[f64]>,
    centroids: &mut DMatrix<f64>,
) {
    let k = centroids.ncols();
    let mut sums = DMatrix::zeros(data.nrows(), k);
    let mut counts = vec![0usize; k];
    for (j, &a) in assign.iter().enumerate() {
        let mut col = sums.column_mut(a);
        col += data.column(j);
        counts[a] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mean: DVector<f64> = sums.column(c) / count as f64;
            centroids.set_column(c, &mean);
        }
    }
    if let Some(dists) = dists {
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if empty.is_empty() {
            return;
        }
        let mut worst: Vec<usize> = (0..data.ncols()).collect();
        worst.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        for (&c, &j) in empty.iter().zip(&worst) {
            if dists[j] > 0.0 {
                centroids.set_column(c, &data.column(j));
            }
        }
    }
}
