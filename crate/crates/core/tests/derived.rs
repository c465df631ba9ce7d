//! Statistical and constructed examples, each checked against an
//! independent computation in `common`.

mod common;

use common::*;
use klines_denoise::clustering::{cluster_spectrum, clustering_cost, klines, kmeans, ClusterConfig};
use klines_denoise::coder::{denoise_block, CoderConfig};
use klines_denoise::dictionary::{build_dictionary, dc_atom, DictionaryOptions};
use klines_denoise::equalization::{select_training_indices, variance_histogram, EqualizationPolicy};
use klines_denoise::patching::{block_variances, extract_blocks};
use klines_denoise::pipeline::{denoise_with_dictionary, train, Selection};
use klines_denoise::{add_awgn, compare_selection, denoise_image, psnr, Dictionary, GrayImage, NoiseSpec, PipelineConfig};
use nalgebra::DMatrix;
use rand::Rng;

fn awgn_field(size: usize, sigma: f64, seed: u64) -> GrayImage {
    add_awgn(&GrayImage::filled(size, size, 128.0).unwrap(), NoiseSpec::new(sigma, seed).unwrap())
}

#[test]
fn awgn_variance_histogram_peaks_at_noise_variance() {
    let img = awgn_field(256, 25.0, 4);
    let stats = block_variances(&extract_blocks(&img, 8, 1).unwrap());
    let hist = variance_histogram(&stats, 64).unwrap();
    let peak = (0..hist.bins()).max_by(|&a, &b| hist.density[a].total_cmp(&hist.density[b])).unwrap();
    let (lo, hi) = (hist.bin_edges[peak], hist.bin_edges[peak + 1]);
    // The population variance of 64 draws is a scaled chi-square with 63
    // degrees of freedom; its mode sits at 625 * 61/64.
    let mode = 625.0 * 61.0 / 64.0;
    let width = hi - lo;
    assert!(lo - width <= mode && mode <= hi + width, "peak bin [{lo}, {hi}) vs mode {mode}");
    let centre = 0.5 * (lo + hi);
    assert!((centre - 625.0).abs() <= 0.1 * 625.0, "peak centre {centre}");
}

#[test]
fn equalized_bins_respect_threshold() {
    // Mass here is relative to the candidate count: thinning caps every
    // bin's expected share at the threshold.
    let clean = half_size(&camera());
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 8).unwrap());
    let stats = block_variances(&extract_blocks(&noisy, 8, 2).unwrap());
    let th = 0.2;
    let policy = EqualizationPolicy {
        threshold: th,
        bins: 64,
        seed: 12,
    };
    let hist = variance_histogram(&stats, 64).unwrap();
    let kept = select_training_indices(&stats, &policy).unwrap();
    let total = stats.variances.len() as f64;
    let mut counts = vec![0usize; hist.bins()];
    for &i in &kept {
        counts[hist.bin_of(stats.variances[i])] += 1;
    }
    let tol = 3.0 * (th / total).sqrt();
    for (b, &c) in counts.iter().enumerate() {
        let mass = c as f64 / total;
        assert!(mass <= th + tol, "bin {b}: {mass} > {th} + {tol}");
        // bins below the threshold are untouched
        if hist.density[b] <= th {
            assert!((mass - hist.density[b]).abs() < 1e-12);
        }
    }
    let dominant = hist.density.iter().cloned().fold(0.0, f64::max);
    assert!(dominant > th, "fixture should have a bin above the threshold");
}

#[test]
fn kmeans_separates_two_clouds() {
    let mut r = rng(21);
    let truth: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let points: Vec<Vec<f64>> = truth
        .iter()
        .map(|&g| {
            let c = if g == 0 { -50.0 } else { 50.0 };
            vec![c + gaussian(&mut r), c + gaussian(&mut r)]
        })
        .collect();
    let data = DMatrix::from_fn(2, 10, |i, j| points[j][i]);
    let model = kmeans(&data, &ClusterConfig::new(2, 3)).unwrap();
    let same = |a: usize, b: usize| model.assignments[a] == model.assignments[b];
    for a in 0..10 {
        for b in 0..10 {
            assert_eq!(same(a, b), truth[a] == truth[b]);
        }
    }
    let opt = brute_force_partition(&points, 2, Cost::Centroid);
    assert!((model.objective() - opt).abs() <= 1e-9 * opt);
}

#[test]
fn klines_recovers_two_lines() {
    let mut r = rng(22);
    let d = [[1.0, 0.2], [-0.3, 1.0]];
    let points: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            let a: f64 = r.random_range(-5.0..5.0);
            d[i % 2].iter().map(|x| a * x).collect()
        })
        .collect();
    let data = DMatrix::from_fn(2, 12, |i, j| points[j][i]);
    let model = klines(&data, &ClusterConfig::new(2, 1).with_restarts(5)).unwrap();
    assert!(model.objective() <= 1e-9 * points.iter().map(|p| norm_sq(p)).sum::<f64>());
    assert!(brute_force_partition(&points, 2, Cost::Line) <= 1e-9);
    let spectrum = cluster_spectrum(&data, &model, 0.0).unwrap();
    for c in &spectrum.clusters {
        assert!(c.noisy_eigenvalues[1] <= 1e-9 * c.noisy_eigenvalues[0]);
    }
}

#[test]
fn awgn_cluster_has_flat_clamped_spectrum() {
    let sigma = 5.0;
    let mut r = rng(23);
    let data = DMatrix::from_fn(16, 20000, |_, _| sigma * gaussian(&mut r));
    let model = klines(&data, &ClusterConfig::new(1, 0)).unwrap();
    let s = cluster_spectrum(&data, &model, sigma).unwrap();
    for &l in &s.clusters[0].eigenvalues {
        assert!(l <= 0.1 * sigma * sigma, "{l}");
    }
}

#[test]
fn rank_one_signal_spectrum() {
    let sigma = 3.0;
    let energy = 100.0 * sigma * sigma;
    let mut r = rng(24);
    let data = rank_r_cluster(&mut r, 16, 20000, &[energy], sigma);
    let model = klines(&data, &ClusterConfig::new(1, 0)).unwrap();
    let s = cluster_spectrum(&data, &model, sigma).unwrap();
    let e = &s.clusters[0].eigenvalues;
    assert!((e[0] - energy).abs() <= 0.05 * energy, "{}", e[0]);
    assert!(e[1..].iter().all(|&l| l <= 0.1 * sigma * sigma));
}

#[test]
fn three_lines_give_three_matching_atoms() {
    let mut r = rng(25);
    let dirs: Vec<Vec<f64>> = (0..3).map(|_| random_unit(&mut r, 3)).collect();
    // exact lines: each cluster is rank one, so it yields a single atom
    let sigma = 0.0;
    let n = 600;
    let amplitudes: Vec<f64> = (0..n).map(|_| 5.0 * gaussian(&mut r)).collect();
    let data = DMatrix::from_fn(3, n, |i, j| amplitudes[j] * dirs[j % 3][i]);
    let model = klines(&data, &ClusterConfig::new(3, 7).with_restarts(10)).unwrap();
    let opts = DictionaryOptions {
        include_dc: false,
        ..DictionaryOptions::default()
    };
    let dict = build_dictionary(&data, &model, sigma, &opts).unwrap();
    assert_eq!(dict.len(), 3);
    for d in &dirs {
        let best = (0..3)
            .map(|j| angle_degrees(d, dict.atoms.column(j).as_slice()))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 2.0, "{best} degrees");
    }
}

#[test]
fn noiseless_rank_r_atoms_span_cluster() {
    let mut r = rng(26);
    let data = rank_r_cluster(&mut r, 8, 200, &[50.0, 20.0], 0.0);
    let model = klines(&data, &ClusterConfig::new(1, 0)).unwrap();
    let opts = DictionaryOptions {
        include_dc: false,
        ..DictionaryOptions::default()
    };
    let dict = build_dictionary(&data, &model, 0.0, &opts).unwrap();
    assert_eq!(dict.len(), 2);
    let atoms: Vec<Vec<f64>> = (0..2).map(|j| dict.atoms.column(j).iter().copied().collect()).collect();
    let refs: Vec<&[f64]> = atoms.iter().map(|a| a.as_slice()).collect();
    for col in data.column_iter() {
        let y: Vec<f64> = col.iter().copied().collect();
        assert!(projection_residual(&y, &refs).sqrt() <= 1e-6);
    }
}

#[test]
fn raising_sigma_never_adds_atoms() {
    let mut r = rng(27);
    let data = rank_r_cluster(&mut r, 16, 3000, &[400.0, 100.0, 25.0], 1.0);
    let model = klines(&data, &ClusterConfig::new(2, 3)).unwrap();
    let mut last = usize::MAX;
    for sigma in [0.5, 1.0, 3.0, 6.0, 12.0, 30.0] {
        let m = build_dictionary(&data, &model, sigma, &DictionaryOptions::default()).unwrap().len();
        assert!(m <= last, "sigma {sigma}: {m} > {last}");
        last = m;
    }
}

#[test]
fn projection_keeps_only_in_span_noise() {
    // y = s + n with s in an r-dim span: projecting onto that span keeps
    // r/dim of the noise energy.
    let (dim, rank, sigma, trials) = (16, 2, 1.0, 4000);
    let mut r = rng(28);
    let basis = rank_r_cluster(&mut r, dim, rank, &[1.0, 1.0], 0.0);
    let q = basis.qr().q();
    let dict = plain_dictionary(q.columns(0, rank).clone_owned());
    let cfg = CoderConfig::new(0.0, rank).unwrap();
    let (mut before, mut after) = (0.0, 0.0);
    for _ in 0..trials {
        let coeffs: Vec<f64> = (0..rank).map(|_| 10.0 * gaussian(&mut r)).collect();
        let clean: Vec<f64> = (0..dim).map(|i| (0..rank).map(|k| coeffs[k] * q[(i, k)]).sum()).collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + sigma * gaussian(&mut r)).collect();
        let out = denoise_block(&noisy, &dict, &cfg).unwrap();
        before += clean.iter().zip(&noisy).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        after += clean.iter().zip(&out).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let ratio = after / before;
    let expected = rank as f64 / dim as f64;
    assert!((ratio - expected).abs() <= 0.1 * expected, "{ratio} vs {expected}");
}

fn rank_limited_image(w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |r, c| {
        100.0 + 40.0 * (c as f64 * 0.3).sin() + 30.0 * (r as f64 * 0.2).cos()
    })
    .unwrap()
}

#[test]
fn clean_input_passes_through() {
    let clean = rank_limited_image(64, 64);
    let cfg = PipelineConfig {
        sigma: 2.0,
        clusters: 8,
        ..PipelineConfig::default()
    };
    let (out, _) = denoise_image(&clean, &cfg, None).unwrap();
    let p = psnr(&out, &clean).unwrap();
    assert!(p >= 40.0, "{p} dB");
}

#[test]
fn dc_only_dictionary_is_mean_smoothing() {
    let mut r = rng(29);
    let img = GrayImage::from_fn(20, 17, |_, _| r.random_range(60.0..200.0)).unwrap();
    let n = 4;
    let dc = DMatrix::from_column_slice(n * n, 1, dc_atom(n * n).as_slice());
    let dict = Dictionary::from_atoms(
        dc,
        vec![klines_denoise::dictionary::AtomSource { cluster: None, rank: 0 }],
        true,
    )
    .unwrap();
    let cfg = PipelineConfig {
        sigma: 5.0,
        block_size: n,
        lambda_avg: Some(0.7),
        ..PipelineConfig::default()
    };
    let (out, _) = denoise_with_dictionary(&img, &dict, &cfg, None).unwrap();
    // every pixel: (lambda * y + sum of covering block means) / (lambda + coverage)
    for row in 0..img.height() {
        for col in 0..img.width() {
            let (mut sum, mut count) = (0.0, 0.0);
            for r0 in row.saturating_sub(n - 1)..=row.min(img.height() - n) {
                for c0 in col.saturating_sub(n - 1)..=col.min(img.width() - n) {
                    let mut mean = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            mean += img.get(r0 + i, c0 + j);
                        }
                    }
                    sum += mean / (n * n) as f64;
                    count += 1.0;
                }
            }
            let want = (0.7 * img.get(row, col) + sum) / (0.7 + count);
            assert!((out.get(row, col) - want).abs() <= 1e-9, "({row}, {col})");
        }
    }
}

#[test]
fn threshold_one_makes_selections_identical() {
    let clean = half_size(&half_size(&camera()));
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 2).unwrap());
    let mut cfg = PipelineConfig {
        clusters: 8,
        ..PipelineConfig::default()
    };
    cfg.equalization.threshold = 1.0;
    let cmp = compare_selection(&noisy, &cfg, &clean).unwrap();
    let (e, u) = (cmp.equalized.without_timings(), cmp.uniform.without_timings());
    assert_eq!(e.psnr_denoised, u.psnr_denoised);
    assert_eq!(e.j_omega, u.j_omega);
    assert_eq!(e.cluster_sizes, u.cluster_sizes);
    assert_eq!(e.atom_count, u.atom_count);
    assert_eq!(e.training_blocks, u.training_blocks);
}

#[test]
fn report_retention_matches_selection() {
    let clean = half_size(&camera());
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 5).unwrap());
    let cfg = PipelineConfig {
        clusters: 16,
        ..PipelineConfig::default()
    };
    let (training, _) = train(&noisy, &cfg, Selection::Equalized).unwrap();
    let blocks = extract_blocks(&noisy, cfg.block_size, cfg.training_stride).unwrap();
    let kept = select_training_indices(&block_variances(&blocks), &cfg.equalization_policy()).unwrap();
    assert_eq!(training.blocks.len(), kept.len());
    assert_eq!(training.retained_fraction, kept.len() as f64 / blocks.len() as f64);
    let (_, report) = denoise_image(&noisy, &cfg, Some(&clean)).unwrap();
    assert_eq!(report.retained_fraction, Some(training.retained_fraction));
}

#[test]
fn equalization_finds_rare_texture() {
    // 128x128 flat field with a small patch of period-4 vertical stripes;
    // period 4 makes every training block inside the patch the same vector.
    let texture = |c: usize| 100.0 + 60.0 * (std::f64::consts::FRAC_PI_2 * c as f64).cos();
    let clean = GrayImage::from_fn(128, 128, |r, c| if r < 28 && c < 28 { texture(c) } else { 100.0 }).unwrap();
    let noisy = add_awgn(&clean, NoiseSpec::new(10.0, 6).unwrap());
    let cfg = PipelineConfig {
        sigma: 10.0,
        clusters: 8,
        ..PipelineConfig::default()
    };
    let blocks = extract_blocks(&clean, 8, cfg.training_stride).unwrap();
    let textured = (0..blocks.len()).filter(|&j| blocks.origins[j].0 < 28 && blocks.origins[j].1 < 28).count();
    assert!((textured as f64) < 0.06 * blocks.len() as f64);

    let direction: Vec<f64> = (0..64).map(|i| texture(i % 8)).collect();
    let (training, _) = train(&noisy, &cfg, Selection::Equalized).unwrap();
    let dict = &training.dictionary;
    let best = (0..dict.len())
        .map(|j| angle_degrees(&direction, dict.atoms.column(j).as_slice()))
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 5.0, "closest atom {best} degrees from the texture");
}

#[test]
fn clustering_cost_reports_both_selections() {
    let clean = half_size(&camera());
    let noisy = add_awgn(&clean, NoiseSpec::new(20.0, 1).unwrap());
    let cfg = PipelineConfig {
        clusters: 16,
        ..PipelineConfig::default()
    };
    let cmp = compare_selection(&noisy, &cfg, &clean).unwrap();
    for rep in [&cmp.equalized, &cmp.uniform] {
        let (j, js) = (rep.j_omega.unwrap(), rep.j_omega_non_smooth.unwrap());
        assert!(j.is_finite() && j > 0.0);
        assert!(js <= j);
    }
    assert_eq!(cmp.equalized.training_blocks, cmp.uniform.training_blocks);
    // same data and model, recomputed directly
    let (training, _) = train(&noisy, &cfg, Selection::Equalized).unwrap();
    let s = cluster_spectrum(&training.blocks.data, &training.model, cfg.sigma).unwrap();
    let cost = clustering_cost(&s, cfg.sigma, cfg.sigma * cfg.sigma).unwrap();
    assert_eq!(Some(cost.total), cmp.equalized.j_omega);
}
