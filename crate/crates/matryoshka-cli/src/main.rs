//! `matryoshka` command-line tool: train-and-hide, decode, assemble, steal,
//! reconstruct, evaluate, post-process, and analyze.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use matryoshka::Error;

#[derive(Parser)]
#[command(name = "matryoshka", version, about = "Hide, publish, and decode models in a carrier model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Jointly train the carrier and the secret tasks through a shared pool,
    /// then publish the carrier checkpoint.
    TrainHide {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Recover the parameter pool from a published carrier checkpoint.
    Decode {
        #[arg(long)]
        carrier: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Fusion strategy for multi-copy carriers: first | first-nonzero | median.
        #[arg(long, default_value = "first-nonzero")]
        fusion: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reassemble a secret model from a decoded pool and its key.
    Assemble {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overfit a generator directly onto sensitive targets (the reference
    /// run for the hidden memorization pipeline).
    Steal {
        /// Tensor file of targets in [0, 1].
        #[arg(long)]
        targets: PathBuf,
        /// Generator architecture, e.g. gen-16x128x64.
        #[arg(long)]
        arch: String,
        #[arg(long, default_value = "gaussian")]
        noise_dist: String,
        #[arg(long)]
        noise_seed: u64,
        #[arg(long, default_value_t = 4000)]
        steps: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        /// Generator init seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the noise from its seed through an assembled generator.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "gaussian")]
        noise_dist: String,
        #[arg(long)]
        noise_count: usize,
        #[arg(long)]
        noise_seed: u64,
        /// Output tensor file.
        #[arg(long)]
        out: PathBuf,
        /// Image shape HxW for the tensor header (defaults to the targets'
        /// shape, or a single row).
        #[arg(long)]
        shape: Option<String>,
        /// Also write one 8-bit PGM per reconstruction.
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
        /// Ground-truth tensor; prints mean sample MSE and SSIM when given.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Evaluate a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset ref, e.g. synthetic:classes=10,dim=784,count=2000,seed=5
        /// or mnist:dir=/data/mnist,count=10000.
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "acc")]
        metric: String,
        /// Baseline metric; prints the signed performance difference.
        #[arg(long)]
        baseline: Option<f64>,
    },
    /// Zero the smallest-magnitude weights per layer.
    Prune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune only the last K layers.
    Finetune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long)]
        last_k: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal transportation distance between model weight histograms.
    Otd {
        /// Two or more model files.
        #[arg(long, num_args = 2.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Write each model's histogram as a plain-text table.
        #[arg(long)]
        hist_dir: Option<PathBuf>,
    },
    /// Summarize a training run log.
    Report {
        #[arg(long)]
        log: PathBuf,
    },
}

fn run(cli: Cli) -> matryoshka::Result<()> {
    match cli.cmd {
        Cmd::TrainHide { config } => commands::cmd_train_hide(&config),
        Cmd::Decode {
            carrier,
            key,
            fusion,
            out,
        } => commands::cmd_decode(&carrier, &key, &fusion, &out),
        Cmd::Assemble { pool, key, out } => commands::cmd_assemble(&pool, &key, &out),
        Cmd::Steal {
            targets,
            arch,
            noise_dist,
            noise_seed,
            steps,
            lr,
            seed,
            out,
        } => commands::cmd_steal(&targets, &arch, &noise_dist, noise_seed, steps, lr, seed, &out),
        Cmd::Reconstruct {
            model,
            noise_dist,
            noise_count,
            noise_seed,
            out,
            shape,
            pgm_dir,
            targets,
        } => commands::cmd_reconstruct(
            &model,
            &noise_dist,
            noise_count,
            noise_seed,
            &out,
            shape.as_deref(),
            pgm_dir.as_deref(),
            targets.as_deref(),
        ),
        Cmd::Eval {
            model,
            data,
            metric,
            baseline,
        } => commands::cmd_eval(&model, &data, &metric, baseline),
        Cmd::Prune { model, beta, out } => commands::cmd_prune(&model, beta, &out),
        Cmd::Finetune {
            model,
            data,
            last_k,
            steps,
            lr,
            batch_size,
            out,
        } => commands::cmd_finetune(&model, &data, last_k, steps, lr, batch_size, &out),
        Cmd::Otd {
            models,
            bins,
            hist_dir,
        } => commands::cmd_otd(&models, bins, hist_dir.as_deref()),
        Cmd::Report { log } => commands::cmd_report(&log),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::InvalidSpec(_) | Error::UnknownArch(_) => 2,
        Error::NumericalFailure(_) | Error::TrainDiverged { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
