//! `denoise.toml`: optional defaults for every subcommand. Flags win over the
//! file, the file wins over built-in defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use denoise_core::dist::ExecMode;
use denoise_core::metrics::SsimVariant;
use denoise_core::model::Arch;
use serde::Deserialize;

use crate::exit::Failure;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: Option<u32>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub prepare: PrepareSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub input_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareSection {
    pub size: Option<usize>,
    pub splits: Option<[f64; 3]>,
    pub seed: Option<u64>,
    pub synthetic: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub mean: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub clamp: Option<bool>,
}

/// Mirrors `TrainConfig`; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub arch: Option<Arch>,
    pub base_ch: Option<usize>,
    pub depth: Option<usize>,
    pub deep_supervision: Option<bool>,
    pub mode: Option<ExecMode>,
    pub workers: Option<usize>,
    pub amp: Option<bool>,
    pub epochs: Option<usize>,
    pub batch_per_worker: Option<usize>,
    pub lr: Option<f64>,
    pub seed_init: Option<u64>,
    pub seed_data: Option<u64>,
    pub early_stop_patience: Option<usize>,
    pub freeze_norm: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub ssim_variant: Option<SsimVariant>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        if let Some(v) = cfg.version {
            if v != CONFIG_VERSION {
                return Err(Failure::usage(format!(
                    "config version {v} unsupported (expected {CONFIG_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }
}
