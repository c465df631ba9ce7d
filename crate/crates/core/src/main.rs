use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use klines_denoise::clustering::{
    cluster_spectrum, clustering_cost, spectrum_from_moments, BlockMatrixDoc, ClusterModelDoc,
};
use klines_denoise::dictionary::DictionaryDoc;
use klines_denoise::pgm::{load_pgm, save_pgm};
use klines_denoise::pipeline::{
    compare_selection, denoise_image_with_training, denoise_with_dictionary, train, Selection,
};
use klines_denoise::{add_awgn, psnr, NoiseSpec, PipelineConfig};

#[derive(Parser)]
#[command(name = "klines-denoise", version, about = "Dictionary denoising of grayscale PGM images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add seeded white Gaussian noise to an image.
    AddNoise {
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Denoise an image, training a dictionary on it unless --dict is given.
    Denoise {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reuse a dictionary written by `train`.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Clean reference for PSNR reporting.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Print the PSNR between two images in dB.
    Psnr { a: PathBuf, b: PathBuf },
    /// Learn a dictionary from a noisy image and write it as JSON.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the cluster model (with per-cluster eigenvalues).
        #[arg(long)]
        model: Option<PathBuf>,
        input: PathBuf,
        dict: PathBuf,
    },
    /// Evaluate the clustering cost J of an imported cluster model.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// Block matrix the model's assignments refer to; needed when the
        /// model file carries no eigenvalues.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Eigenvalue level below which a cluster counts as smooth (default sigma^2).
        #[arg(long)]
        smooth_cutoff: Option<f64>,
    },
    /// Compare equalized against uniform-random training selection.
    CompareSelection {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        input: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::AddNoise {
            sigma,
            seed,
            input,
            output,
        } => {
            let img = load_pgm(&input)?;
            let noisy = add_awgn(&img, NoiseSpec::new(sigma, seed)?);
            save_pgm(&output, &noisy)?;
        }
        Command::Denoise {
            config,
            dict,
            clean,
            report,
            input,
            output,
        } => {
            let cfg = load_config(config.as_deref())?;
            let noisy = load_pgm(&input)?;
            let clean = clean.map(load_pgm).transpose()?;
            let (out, rep) = match dict {
                Some(d) => {
                    let dict = read_json::<DictionaryDoc>(&d)?.to_dictionary()?;
                    denoise_with_dictionary(&noisy, &dict, &cfg, clean.as_ref())?
                }
                None => {
                    let (out, rep, _) = denoise_image_with_training(&noisy, &cfg, clean.as_ref())?;
                    (out, rep)
                }
            };
            save_pgm(&output, &out)?;
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
            if let (Some(a), Some(b)) = (rep.psnr_noisy, rep.psnr_denoised) {
                eprintln!("PSNR noisy {a:.2} dB -> denoised {b:.2} dB");
            }
        }
        Command::Psnr { a, b } => {
            let v = psnr(&load_pgm(&a)?, &load_pgm(&b)?)?;
            if v.is_infinite() {
                println!("inf");
            } else {
                println!("{v:.4}");
            }
        }
        Command::Train {
            config,
            model,
            input,
            dict,
        } => {
            let cfg = load_config(config.as_deref())?;
            let noisy = load_pgm(&input)?;
            let (training, _) = train(&noisy, &cfg, Selection::Equalized)?;
            write_json(&dict, &DictionaryDoc::from_dictionary(&training.dictionary))?;
            if let Some(p) = model {
                write_json(&p, &training.model_doc(cfg.sigma)?)?;
            }
            eprintln!(
                "{} atoms from {} of {} blocks",
                training.dictionary.len(),
                training.blocks.len(),
                training.candidate_blocks
            );
        }
        Command::Bound {
            model,
            sigma,
            data,
            smooth_cutoff,
        } => {
            if sigma.is_nan() || sigma <= 0.0 {
                bail!("sigma must be > 0");
            }
            let doc: ClusterModelDoc = read_json(&model)?;
            let parsed = doc.to_model()?;
            let spectrum = match (data, &doc.second_moment_eigenvalues) {
                (Some(d), _) => {
                    let blocks = read_json::<BlockMatrixDoc>(&d)?.to_matrix()?;
                    cluster_spectrum(&blocks, &parsed, sigma)?
                }
                (None, Some(eigs)) => spectrum_from_moments(eigs, &parsed.sizes, sigma)?,
                (None, None) => bail!("model has no eigenvalues; pass --data with the clustered blocks"),
            };
            let cost = clustering_cost(&spectrum, sigma, smooth_cutoff.unwrap_or(sigma * sigma))?;
            let out = serde_json::json!({
                "j_omega": cost.total,
                "j_omega_non_smooth": cost.non_smooth,
                "smooth_clusters": cost.smooth_clusters,
                "nonempty_clusters": spectrum.clusters.len(),
                "empty_clusters": spectrum.empty,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::CompareSelection {
            config,
            clean,
            report,
            input,
        } => {
            let cfg = load_config(config.as_deref())?;
            let noisy = load_pgm(&input)?;
            let clean = load_pgm(&clean)?;
            let cmp = compare_selection(&noisy, &cfg, &clean)?;
            if let Some(p) = report {
                write_json(&p, &cmp)?;
            }
            println!(
                "equalized {:.3} dB (J {:.4}), uniform {:.3} dB (J {:.4})",
                cmp.equalized.psnr_denoised.unwrap_or(f64::NAN),
                cmp.equalized.j_omega.unwrap_or(f64::NAN),
                cmp.uniform.psnr_denoised.unwrap_or(f64::NAN),
                cmp.uniform.j_omega.unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
