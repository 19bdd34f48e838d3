use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
}

/// Mean and 95% half-width (normal quantile, sample standard deviation).
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "confidence interval needs n >= 2, got {}",
            values.len()
        )));
    }
    let (mean, std) = mean_std(values);
    Ok((mean, Z95 * std / (values.len() as f64).sqrt()))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    /// SSIM variant label; `None` for PSNR.
    pub variant: Option<String>,
    pub n: usize,
    /// NaN when `n == 0`.
    pub mean: f64,
    /// NaN when `n < 2`.
    pub std: f64,
    /// NaN when `n < 2`.
    pub ci95: f64,
    pub per_image: Vec<(String, f64)>,
    /// Ids whose value was infinite (identical images under PSNR).
    pub excluded: Vec<String>,
}

impl MetricSummary {
    /// Aggregates finite values; infinite ones are set aside and logged.
    pub fn from_values(
        metric: Metric,
        variant: Option<String>,
        values: Vec<(String, f64)>,
    ) -> Self {
        let (per_image, excluded): (Vec<_>, Vec<_>) =
            values.into_iter().partition(|(_, v)| v.is_finite());
        let excluded: Vec<String> = excluded.into_iter().map(|(id, _)| id).collect();
        if !excluded.is_empty() {
            log::info!(
                "{metric:?}: {} infinite values excluded from aggregation",
                excluded.len()
            );
        }
        let vals: Vec<f64> = per_image.iter().map(|(_, v)| *v).collect();
        let n = vals.len();
        let (mean, std) = match n {
            0 => (f64::NAN, f64::NAN),
            1 => (vals[0], f64::NAN),
            _ => mean_std(&vals),
        };
        MetricSummary {
            metric,
            variant,
            n,
            mean,
            std,
            ci95: Z95 * std / (n as f64).sqrt(),
            per_image,
            excluded,
        }
    }

    /// `34.95 (±0.04)` for PSNR, `0.9168 (±0.0008)` for SSIM.
    pub fn format_cell(&self) -> String {
        match self.metric {
            Metric::Psnr => format!("{:.2} (±{:.2})", self.mean, self.ci95),
            Metric::Ssim => format!("{:.4} (±{:.4})", self.mean, self.ci95),
        }
    }
}
