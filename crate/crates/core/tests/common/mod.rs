//! Brute-force oracles and fixtures shared by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use std::path::PathBuf;

use klines_denoise::pgm::load_pgm;
use klines_denoise::GrayImage;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn camera() -> GrayImage {
    load_pgm(testdata("camera.pgm")).expect("camera.pgm")
}

pub fn astronaut() -> GrayImage {
    load_pgm(testdata("astronaut.pgm")).expect("astronaut.pgm")
}

/// 2x2 box average, rounded back to integers like a stored 8-bit image.
pub fn half_size(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width() / 2, img.height() / 2, |r, c| {
        let s = img.get(2 * r, 2 * c) + img.get(2 * r + 1, 2 * c) + img.get(2 * r, 2 * c + 1) + img.get(2 * r + 1, 2 * c + 1);
        (s / 4.0).round()
    })
    .unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Largest eigenvalue of a small symmetric matrix (row-major, `d x d`)
/// by cyclic Jacobi rotations.
pub fn jacobi_max_eigenvalue(mut a: Vec<f64>, d: usize) -> f64 {
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * d + j].powi(2)).sum();
        let diag: f64 = (0..d).map(|i| a[i * d + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Cost {
    /// Squared distance to the cluster mean.
    Centroid,
    /// Squared distance to the best line through the origin.
    Line,
}

fn group_cost(points: &[Vec<f64>], members: &[usize], cost: Cost) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let d = points[0].len();
    match cost {
        Cost::Centroid => {
            let mut mean = vec![0.0; d];
            for &m in members {
                for (a, x) in mean.iter_mut().zip(&points[m]) {
                    *a += x;
                }
            }
            mean.iter_mut().for_each(|a| *a /= members.len() as f64);
            members
                .iter()
                .map(|&m| points[m].iter().zip(&mean).map(|(x, c)| (x - c).powi(2)).sum::<f64>())
                .sum()
        }
        Cost::Line => {
            let mut s = vec![0.0; d * d];
            let mut energy = 0.0;
            for &m in members {
                let y = &points[m];
                energy += norm_sq(y);
                for i in 0..d {
                    for j in 0..d {
                        s[i * d + j] += y[i] * y[j];
                    }
                }
            }
            (energy - jacobi_max_eigenvalue(s, d)).max(0.0)
        }
    }
}

/// Exhaustive optimum over every partition of `points` into at most `k`
/// groups (restricted-growth enumeration).
pub fn brute_force_partition(points: &[Vec<f64>], k: usize, cost: Cost) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    fn recurse(
        i: usize,
        used: usize,
        labels: &mut Vec<usize>,
        k: usize,
        points: &[Vec<f64>],
        cost: Cost,
        best: &mut f64,
    ) {
        if i == labels.len() {
            let total: f64 = (0..used)
                .map(|g| {
                    let members: Vec<usize> = (0..labels.len()).filter(|&p| labels[p] == g).collect();
                    group_cost(points, &members, cost)
                })
                .sum();
            *best = best.min(total);
            return;
        }
        for g in 0..(used + 1).min(k) {
            labels[i] = g;
            recurse(i + 1, used.max(g + 1), labels, k, points, cost, best);
        }
    }
    if n > 0 {
        recurse(1, 1, &mut labels, k, points, cost, &mut best);
    }
    best
}

/// Residual energy of projecting `y` onto the span of `atoms`
/// (Gram-Schmidt, reorthogonalized).
pub fn projection_residual(y: &[f64], atoms: &[&[f64]]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for a in atoms {
        let mut v = a.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, bb)| *x -= c * bb);
            }
        }
        let nrm = norm_sq(&v).sqrt();
        if nrm > 1e-10 {
            v.iter_mut().for_each(|x| *x /= nrm);
            basis.push(v);
        }
    }
    let mut r = y.to_vec();
    for _ in 0..2 {
        for b in &basis {
            let c = dot(&r, b);
            r.iter_mut().zip(b).for_each(|(x, bb)| *x -= c * bb);
        }
    }
    norm_sq(&r)
}

/// Best residual over every support of exactly `size` atoms (`size = 0` gives `||y||^2`).
pub fn best_residual_of_size(y: &[f64], atoms: &[Vec<f64>], size: usize) -> f64 {
    fn rec(y: &[f64], atoms: &[Vec<f64>], start: usize, left: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if left == 0 {
            let sel: Vec<&[f64]> = chosen.iter().map(|&i| atoms[i].as_slice()).collect();
            *best = best.min(projection_residual(y, &sel));
            return;
        }
        for i in start..atoms.len() {
            chosen.push(i);
            rec(y, atoms, i + 1, left - 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(y, atoms, 0, size, &mut Vec::new(), &mut best);
    best
}

pub fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
        let n = norm_sq(&v).sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Columns are `N` samples of a rank-`r` signal with per-direction energies
/// `energies` (uncentered second moments) plus AWGN of `sigma`.
pub fn rank_r_cluster(rng: &mut impl Rng, dim: usize, n: usize, energies: &[f64], sigma: f64) -> DMatrix<f64> {
    // orthonormal signal directions
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    while dirs.len() < energies.len() {
        let mut v = random_unit(rng, dim);
        for b in &dirs {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, bb)| *x -= c * bb);
        }
        let nrm = norm_sq(&v).sqrt();
        if nrm > 1e-3 {
            dirs.push(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    let mut m = DMatrix::zeros(dim, n);
    for j in 0..n {
        for (d, e) in dirs.iter().zip(energies) {
            let a = e.sqrt() * gaussian(rng);
            for i in 0..dim {
                m[(i, j)] += a * d[i];
            }
        }
        for i in 0..dim {
            m[(i, j)] += sigma * gaussian(rng);
        }
    }
    m
}

pub fn angle_degrees(a: &[f64], b: &[f64]) -> f64 {
    let c = (dot(a, b).abs() / (norm_sq(a) * norm_sq(b)).sqrt()).min(1.0);
    c.acos().to_degrees()
}

/// Dictionary over the (normalized) columns of `m`, no cluster provenance.
pub fn plain_dictionary(m: DMatrix<f64>) -> klines_denoise::Dictionary {
    let provenance = (0..m.ncols())
        .map(|rank| klines_denoise::dictionary::AtomSource { cluster: None, rank })
        .collect();
    klines_denoise::Dictionary::from_atoms(m, provenance, false).unwrap()
}
