use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod exit;

use config::RunConfig;
use exit::Failure;

/// Train and evaluate U-Net / U-Net++ denoisers on grayscale images.
#[derive(Debug, Parser)]
#[command(name = "denoise", version)]
pub struct Cli {
    /// TOML file supplying defaults for any flag below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resize clean images (or generate phantoms) and write a manifest with splits.
    Prepare(PrepareArgs),
    /// Apply Gaussian noise to every record and record it in the manifest.
    Corrupt(CorruptArgs),
    /// Train a model; writes checkpoints, best.ckpt and train_log.jsonl.
    Train(TrainArgs),
    /// Score a checkpoint on the test split; writes CSV and JSON reports.
    Evaluate(EvaluateArgs),
    /// Train several configurations and compare wall-clock times.
    Bench(BenchArgs),
    /// Render a noisy | U-Net | U-Net++ | clean comparison grid.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Directory of .pgm/.png images.
    #[arg(long, conflicts_with = "synthetic")]
    pub input_dir: Option<PathBuf>,
    /// Generate this many synthetic phantoms instead of reading a directory.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Output side length in pixels (default 256).
    #[arg(long)]
    pub size: Option<usize>,
    /// Train,val,test fractions (default 0.5,0.33,0.17).
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<f64>>,
    /// Seed for splitting and phantom generation (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Manifest path; images are written next to it (default: paths.manifest).
    #[arg(long)]
    pub out_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Dataset manifest (default: paths.manifest from --config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Noise standard deviation, e.g. 0.1 for 10% noise.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Noise mean (default 0.1).
    #[arg(long, allow_negative_numbers = true)]
    pub mean: Option<f64>,
    /// Noise seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep noisy values outside [0, 1] before quantization (default: clamp).
    #[arg(long)]
    pub no_clamp: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (default: paths.manifest from --config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// unet or unetpp (default unet).
    #[arg(long)]
    pub arch: Option<String>,
    /// Base channel width (default 8).
    #[arg(long)]
    pub base_ch: Option<usize>,
    /// Number of resolution levels (default 4).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Attach a head to every outer decoder node (unetpp only).
    #[arg(long)]
    pub deep_supervision: bool,
    /// single, dp or ddp (default single).
    #[arg(long)]
    pub mode: Option<String>,
    /// Worker count (default 1).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Emulated mixed precision with dynamic loss scaling.
    #[arg(long)]
    pub amp: bool,
    /// Default 50.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Default 16.
    #[arg(long)]
    pub batch_per_worker: Option<usize>,
    /// Adam learning rate (default 1e-3).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Parameter initialization seed (default 0).
    #[arg(long)]
    pub seed_init: Option<u64>,
    /// Shuffling seed (default 0).
    #[arg(long)]
    pub seed_data: Option<u64>,
    /// Stop after this many epochs without validation improvement (default: never).
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    /// Use batch-norm running statistics during training.
    #[arg(long)]
    pub freeze_norm: bool,
    /// Directory for checkpoints and the training log (default: paths.out_dir, else "runs").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset manifest (default: paths.manifest from --config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint to score, usually best.ckpt.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Expected architecture; a checkpoint of another architecture is rejected.
    #[arg(long)]
    pub arch: Option<String>,
    /// global or windowed (default windowed).
    #[arg(long)]
    pub ssim_variant: Option<String>,
    /// Report CSV path; a JSON mirror is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset manifest (default: paths.manifest from --config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// TOML file with [[config]] tables (label, baseline, train overrides).
    #[arg(long)]
    pub configs: PathBuf,
    /// Output directory for runs and timing.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Dataset manifest (default: paths.manifest from --config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// U-Net and U-Net++ checkpoints, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ckpts: Vec<PathBuf>,
    /// Record ids, one grid row each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ids: Vec<String>,
    /// Output image (.png or .pgm).
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Prepare(a) => commands::prepare(a, &cfg),
        Command::Corrupt(a) => commands::corrupt(a, &cfg),
        Command::Train(a) => commands::train(a, &cfg),
        Command::Evaluate(a) => commands::evaluate(a, &cfg),
        Command::Bench(a) => commands::bench(a, &cfg),
        Command::Render(a) => commands::render(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
