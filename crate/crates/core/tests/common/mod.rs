//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the library's own kernels or metrics.
#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

use denoise_core::data::{corrupt, gen_synthetic_phantoms, Dataset, NoiseSpec};
use denoise_core::{Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A boxed scalar test function over tape inputs.
pub type Check = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut r = rng(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(lo..hi)).collect()).unwrap()
}

/// Central differences of a scalar function over every element of every input.
///
/// Returns the worst `|a - n| / max(|a|, |n|, floor)` where `floor` is
/// `1e-3` of the largest numeric gradient magnitude. The floor keeps entries
/// whose true gradient is zero from dividing noise by noise.
pub fn fd_max_rel_err<F>(inputs: &[Tensor<f64>], f: F, h: f64) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone(), false)).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.value(out).data()[0]
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    let out = f(&mut tape, &vars).unwrap();
    assert_eq!(tape.value(out).len(), 1, "checked function must be scalar");
    let grads = tape.backward(out).unwrap();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let zeros = vec![0.0; inputs[k].len()];
        let a = grads.get(*v).unwrap_or(&zeros);
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            probe[k].data_mut()[i] = orig + h;
            let plus = eval(&probe);
            probe[k].data_mut()[i] = orig - h;
            let minus = eval(&probe);
            probe[k].data_mut()[i] = orig;
            analytic.push(a[i]);
            numeric.push((plus - minus) / (2.0 * h));
        }
    }
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-12);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `sum(y * r)` for a fixed random `r`, so every output element matters with
/// a distinct weight.
pub fn weighted_sum(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let r = tape.constant(random_tensor(&shape, seed, -1.0, 1.0));
    let p = tape.mul(y, r)?;
    Ok(tape.sum(p))
}

/// Direct-loop cross-correlation, `x: [N,Cin,H,W]`, `w: [Cout,Cin,K,K]`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_direct(
    x: &[f64],
    n: usize,
    cin: usize,
    h: usize,
    wd: usize,
    w: &[f64],
    cout: usize,
    k: usize,
    b: &[f64],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; n * cout * oh * ow];
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[co];
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += x[((ni * cin + ci) * h + iy as usize) * wd + ix as usize]
                                    * w[((co * cin + ci) * k + ky) * k + kx];
                            }
                        }
                    }
                    out[((ni * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, oh, ow)
}

/// Scatter form of the stride-2, kernel-2 transposed convolution,
/// `w: [Cin, Cout, 2, 2]`.
pub fn conv_transpose_direct(
    x: &[f64],
    n: usize,
    cin: usize,
    h: usize,
    wd: usize,
    w: &[f64],
    cout: usize,
    b: &[f64],
) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * wd);
    let mut out = vec![0.0; n * cout * oh * ow];
    for ni in 0..n {
        for co in 0..cout {
            for p in out[(ni * cout + co) * oh * ow..][..oh * ow].iter_mut() {
                *p = b[co];
            }
        }
        for ci in 0..cin {
            for y in 0..h {
                for xx in 0..wd {
                    let v = x[((ni * cin + ci) * h + y) * wd + xx];
                    for co in 0..cout {
                        for ky in 0..2 {
                            for kx in 0..2 {
                                out[((ni * cout + co) * oh + 2 * y + ky) * ow + 2 * xx + kx] +=
                                    v * w[((ci * cout + co) * 2 + ky) * 2 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn psnr_loop(a: &[f64], b: &[f64]) -> f64 {
    let mut se = 0.0;
    for i in 0..a.len() {
        se += (a[i] - b[i]) * (a[i] - b[i]);
    }
    let mse = se / a.len() as f64;
    10.0 * (1.0 / mse).log10()
}

const C1: f64 = 1e-4;
const C2: f64 = 9e-4;

fn ssim_formula(ma: f64, mb: f64, va: f64, vb: f64, cov: f64) -> f64 {
    ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2))
}

pub fn ssim_global_loop(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut ma, mut mb) = (0.0, 0.0);
    for i in 0..a.len() {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cov += (a[i] - ma) * (b[i] - mb);
    }
    ssim_formula(ma, mb, va / n, vb / n, cov / n)
}

/// Full 2-D Gaussian window (11x11, sigma 1.5) evaluated per valid position
/// with weighted central moments.
pub fn ssim_windowed_loop(a: &[f64], b: &[f64], width: usize) -> f64 {
    let height = a.len() / width;
    let k = 11usize;
    let mut wts = vec![0.0; k * k];
    let mut total = 0.0;
    for y in 0..k {
        for x in 0..k {
            let d2 = (y as f64 - 5.0).powi(2) + (x as f64 - 5.0).powi(2);
            wts[y * k + x] = (-d2 / (2.0 * 1.5 * 1.5)).exp();
            total += wts[y * k + x];
        }
    }
    for w in &mut wts {
        *w /= total;
    }
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=height - k {
        for x0 in 0..=width - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in 0..k {
                for x in 0..k {
                    let w = wts[y * k + x];
                    ma += w * a[(y0 + y) * width + x0 + x];
                    mb += w * b[(y0 + y) * width + x0 + x];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in 0..k {
                for x in 0..k {
                    let w = wts[y * k + x];
                    let da = a[(y0 + y) * width + x0 + x] - ma;
                    let db = b[(y0 + y) * width + x0 + x] - mb;
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            }
            sum += ssim_formula(ma, mb, va, vb, cov);
            count += 1;
        }
    }
    sum / count as f64
}

/// Noisy/clean phantom pairs held in memory.
pub fn phantom_pairs(n: usize, size: usize, sigma: f64, seed: u64) -> Dataset {
    let spec = NoiseSpec::new(0.1, sigma, seed ^ 0x5eed);
    let pairs = gen_synthetic_phantoms(n, size, seed)
        .into_iter()
        .map(|c| {
            let noisy = corrupt(&c, &spec);
            (c.id.clone(), noisy.pixels, c.pixels)
        })
        .collect();
    Dataset::new(size, pairs).unwrap()
}

pub fn subset(ds: &Dataset, range: std::ops::Range<usize>) -> Dataset {
    let pairs = range
        .map(|i| (ds.ids[i].clone(), ds.noisy[i].clone(), ds.clean[i].clone()))
        .collect();
    Dataset::new(ds.size, pairs).unwrap()
}

/// Weights and biases of a conv layer.
pub fn conv_params(cin: usize, cout: usize, k: usize) -> usize {
    cout * cin * k * k + cout
}

/// conv3x3 + BN, twice.
pub fn block_params(cin: usize, cout: usize) -> usize {
    conv_params(cin, cout, 3) + 2 * cout + conv_params(cout, cout, 3) + 2 * cout
}

/// Layer-by-layer count for the classical U-Net with transposed-conv upsampling.
pub fn unet_param_count(base: usize, depth: usize) -> usize {
    let c = |l: usize| base << l;
    let mut total = block_params(1, c(0));
    for l in 1..depth {
        total += block_params(c(l - 1), c(l));
    }
    for l in (0..depth - 1).rev() {
        total += conv_params(c(l + 1), c(l), 2);
        total += block_params(2 * c(l), c(l));
    }
    total + conv_params(c(0), 1, 1)
}

/// Nested-grid count: node (i, j) sees `j` same-level maps plus one upsampled map.
pub fn unetpp_param_count(base: usize, depth: usize, deep_supervision: bool) -> usize {
    let c = |l: usize| base << l;
    let mut total = block_params(1, c(0));
    for l in 1..depth {
        total += block_params(c(l - 1), c(l));
    }
    for j in 1..depth {
        for i in 0..depth - j {
            total += block_params(j * c(i) + c(i + 1), c(i));
        }
    }
    let heads = if deep_supervision { depth - 1 } else { 1 };
    total + heads * conv_params(c(0), 1, 1)
}
