use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::Evaluation;
use crate::dist::TimingRow;
use crate::error::{Error, Result};

/// One evaluated configuration with its optional timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// Noise standard deviation.
    pub noise_level: f64,
    pub model: String,
    pub mode: String,
    pub workers: usize,
    pub amp: bool,
    pub evaluation: Evaluation,
    pub train_seconds: Option<f64>,
    pub ts_percent: Option<f64>,
}

impl ReportEntry {
    pub fn with_timing(mut self, row: &TimingRow) -> Self {
        self.train_seconds = Some(row.total_seconds);
        self.ts_percent = Some(row.ts_percent);
        self
    }

    pub fn row(&self) -> ReportRow {
        ReportRow {
            noise_level: self.noise_level,
            model: self.model.clone(),
            mode: self.mode.clone(),
            workers: self.workers,
            amp: self.amp,
            psnr_mean: self.evaluation.psnr.mean,
            psnr_ci: self.evaluation.psnr.ci95,
            ssim_mean: self.evaluation.ssim.mean,
            ssim_ci: self.evaluation.ssim.ci95,
            train_seconds: self.train_seconds,
            ts_percent: self.ts_percent,
        }
    }
}

/// Flat CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub noise_level: f64,
    pub model: String,
    pub mode: String,
    pub workers: usize,
    pub amp: bool,
    pub psnr_mean: f64,
    pub psnr_ci: f64,
    pub ssim_mean: f64,
    pub ssim_ci: f64,
    pub train_seconds: Option<f64>,
    pub ts_percent: Option<f64>,
}

const HEADER: [&str; 11] = [
    "noise_level",
    "model",
    "mode",
    "workers",
    "amp",
    "psnr_mean",
    "psnr_ci",
    "ssim_mean",
    "ssim_ci",
    "train_seconds",
    "ts_percent",
];

/// Writes `csv_path` and a JSON mirror (same stem, `.json`) holding per-image
/// values. Returns both paths.
pub fn emit_report(entries: &[ReportEntry], csv_path: &Path) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for e in entries {
        w.serialize(e.row()).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    fs::write(csv_path, bytes).map_err(|e| Error::io(csv_path, e))?;

    let json_path = csv_path.with_extension("json");
    let mut text = serde_json::to_string_pretty(entries)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path.to_path_buf(), json_path))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("csv: {e}")))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("csv: {e}"))))
        .collect()
}
