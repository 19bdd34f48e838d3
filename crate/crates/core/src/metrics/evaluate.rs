use serde::{Deserialize, Serialize};

use super::quality::{psnr, ssim, SsimVariant};
use super::summary::{Metric, MetricSummary};
use crate::data::Dataset;
use crate::error::{size_err, Error, Result};
use crate::model::Graph;
use crate::scalar::Scalar;

const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub psnr: MetricSummary,
    pub ssim: MetricSummary,
}

impl Evaluation {
    /// Table-style cells: `PSNR (±ci) | SSIM (±ci)`.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{label} | {} | {}",
            self.psnr.format_cell(),
            self.ssim.format_cell()
        )
    }
}

/// Scores each `pred[i]` (clamped to [0, 1]) against `clean[i]`.
pub fn evaluate_pairs(
    ids: &[String],
    preds: &[Vec<f64>],
    clean: &[Vec<f64>],
    width: usize,
    variant: SsimVariant,
) -> Result<Evaluation> {
    if ids.is_empty() {
        return Err(Error::Domain("nothing to evaluate".into()));
    }
    if preds.len() != ids.len() || clean.len() != ids.len() {
        return Err(size_err!(
            "{} ids, {} predictions, {} targets",
            ids.len(),
            preds.len(),
            clean.len()
        ));
    }
    let mut p_vals = Vec::with_capacity(ids.len());
    let mut s_vals = Vec::with_capacity(ids.len());
    for ((id, p), c) in ids.iter().zip(preds).zip(clean) {
        let p: Vec<f64> = p.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        p_vals.push((id.clone(), psnr(&p, c, 1.0)?));
        s_vals.push((id.clone(), ssim(&p, c, width, variant)?));
    }
    Ok(Evaluation {
        psnr: MetricSummary::from_values(Metric::Psnr, None, p_vals),
        ssim: MetricSummary::from_values(Metric::Ssim, Some(variant.to_string()), s_vals),
    })
}

/// Predicts every noisy image of `ds` with the deepest head (eval mode) and
/// scores it against the clean image.
pub fn evaluate_testset<T: Scalar>(
    graph: &mut Graph<T>,
    ds: &Dataset,
    amp: bool,
    variant: SsimVariant,
) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::Domain("test split is empty".into()));
    }
    let plane = ds.size * ds.size;
    let mut preds = Vec::with_capacity(ds.len());
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let b = ds.batch::<T>(chunk);
        let out = graph.predict(&b.noisy, amp)?;
        for img in out.data().chunks(plane) {
            preds.push(img.iter().map(|v| v.as_f64()).collect());
        }
    }
    let clean: Vec<Vec<f64>> = ds
        .clean
        .iter()
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    evaluate_pairs(&ds.ids, &preds, &clean, ds.size, variant)
}
