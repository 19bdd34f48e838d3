use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{size_err, Error, Result};
use crate::scalar::Scalar;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsimVariant {
    /// The formula evaluated once over the whole image.
    Global,
    /// Mean over an 11x11 Gaussian window (sigma 1.5), valid region only.
    Windowed,
}

impl fmt::Display for SsimVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SsimVariant::Global => "global",
            SsimVariant::Windowed => "windowed",
        })
    }
}

impl FromStr for SsimVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(SsimVariant::Global),
            "windowed" => Ok(SsimVariant::Windowed),
            other => Err(Error::Config(format!(
                "unknown SSIM variant {other:?} (global, windowed)"
            ))),
        }
    }
}

/// Peak signal-to-noise ratio in dB; `+inf` when the images are equal.
pub fn psnr<T: Scalar>(a: &[T], b: &[T], max_val: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(size_err!("psnr: {} vs {} pixels", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Domain("psnr of an empty image".into()));
    }
    let se: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Structural similarity of two `width`-wide images with dynamic range 1.
pub fn ssim<T: Scalar>(a: &[T], b: &[T], width: usize, variant: SsimVariant) -> Result<f64> {
    if a.len() != b.len() {
        return Err(size_err!("ssim: {} vs {} pixels", a.len(), b.len()));
    }
    if width == 0 || a.is_empty() || !a.len().is_multiple_of(width) {
        return Err(size_err!(
            "ssim: {} pixels is not a whole number of rows of {width}",
            a.len()
        ));
    }
    let a: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    let b: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    let height = a.len() / width;
    match variant {
        SsimVariant::Global => Ok(global(&a, &b)),
        SsimVariant::Windowed => windowed(&a, &b, width, height),
    }
}

fn formula(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}

fn global(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mu_a = a.iter().sum::<f64>() / n;
    let mu_b = b.iter().sum::<f64>() / n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mu_a, y - mu_b);
        va += dx * dx;
        vb += dy * dy;
        cov += dx * dy;
    }
    formula(mu_a, mu_b, va / n, vb / n, cov / n)
}

/// Separable filtering of the five moment images, then the formula per pixel.
fn windowed(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<f64> {
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(size_err!(
            "windowed ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {width}x{height}"
        ));
    }
    let g = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let f = |img: &[f64]| filter_valid(img, width, height, &g);
    let (mu_a, mu_b, e_aa, e_bb, e_ab) = (f(a), f(b), f(&aa), f(&bb), f(&ab));
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        total += formula(
            ma,
            mb,
            e_aa[i] - ma * ma,
            e_bb[i] - mb * mb,
            e_ab[i] - ma * mb,
        );
    }
    Ok(total / mu_a.len() as f64)
}

fn filter_valid(img: &[f64], width: usize, height: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        let src = &img[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = g.iter().zip(&src[x..x + k]).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g
                .iter()
                .enumerate()
                .map(|(j, w)| w * rows[(y + j) * ow + x])
                .sum();
        }
    }
    out
}
