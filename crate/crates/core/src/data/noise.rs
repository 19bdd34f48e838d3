use serde::{Deserialize, Serialize};

use super::image::ImageRecord;
use crate::error::{Error, Result};
use crate::rng::{self, BoxMuller};

/// Additive Gaussian obfuscation applied at the data-owning site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mean: f64,
    pub sigma: f64,
    pub seed: u64,
    pub clamp: bool,
}

impl NoiseSpec {
    pub fn new(mean: f64, sigma: f64, seed: u64) -> Self {
        Self {
            mean,
            sigma,
            seed,
            clamp: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan()
            || self.sigma < 0.0
            || !self.mean.is_finite()
            || !self.sigma.is_finite()
        {
            return Err(Error::Domain(format!(
                "noise needs finite mean and sigma >= 0, got mean {} sigma {}",
                self.mean, self.sigma
            )));
        }
        Ok(())
    }

    /// Short label used in file names, e.g. `n10` for sigma 0.1.
    pub fn tag(&self) -> String {
        format!("n{}", (self.sigma * 100.0).round() as i64)
    }
}

/// `clamp01(pixel + n)` with `n ~ Normal(mean, sigma^2)` drawn from a stream
/// keyed by `(spec.seed, rec.id)`.
pub fn corrupt(rec: &ImageRecord, spec: &NoiseSpec) -> ImageRecord {
    let mut normal = BoxMuller::new(rng::keyed(spec.seed, &rec.id));
    let pixels = rec
        .pixels
        .iter()
        .map(|&p| {
            let v = (p as f64 + (spec.mean + spec.sigma * normal.next_standard())) as f32;
            if spec.clamp {
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        })
        .collect();
    ImageRecord {
        pixels,
        ..rec.clone()
    }
}
