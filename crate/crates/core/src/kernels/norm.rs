use crate::scalar::Scalar;

/// Saved state of a training-mode batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased per-channel variance.
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
    pub xhat: Vec<T>,
}

fn channel_iter<T: Copy>(
    x: &[T],
    n: usize,
    c: usize,
    plane: usize,
    ch: usize,
) -> impl Iterator<Item = T> + '_ {
    (0..n).flat_map(move |s| {
        x[(s * c + ch) * plane..(s * c + ch + 1) * plane]
            .iter()
            .copied()
    })
}

/// Normalizes with batch statistics. Returns `(y, stats)`.
pub fn batchnorm_train_forward<T: Scalar>(
    x: &[T],
    dims: [usize; 4],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> (Vec<T>, BatchStats<T>) {
    let [n, c, h, w] = dims;
    let plane = h * w;
    let m = T::from_usize(n * plane).unwrap();
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    let mut inv_std = vec![T::zero(); c];
    for ch in 0..c {
        let mu = channel_iter(x, n, c, plane, ch).sum::<T>() / m;
        let v = channel_iter(x, n, c, plane, ch)
            .map(|v| (v - mu) * (v - mu))
            .sum::<T>()
            / m;
        mean[ch] = mu;
        var[ch] = v;
        inv_std[ch] = T::one() / (v + eps).sqrt();
    }
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for (i, (&v, (xh, out))) in x.iter().zip(xhat.iter_mut().zip(y.iter_mut())).enumerate() {
        let ch = (i / plane) % c;
        *xh = (v - mean[ch]) * inv_std[ch];
        *out = gamma[ch] * *xh + beta[ch];
    }
    (
        y,
        BatchStats {
            mean,
            var,
            inv_std,
            xhat,
        },
    )
}

/// Returns `(gx, ggamma, gbeta)`.
pub fn batchnorm_train_backward<T: Scalar>(
    gy: &[T],
    dims: [usize; 4],
    gamma: &[T],
    stats: &BatchStats<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let [n, c, h, w] = dims;
    let plane = h * w;
    let m = T::from_usize(n * plane).unwrap();
    let mut gbeta = vec![T::zero(); c];
    let mut ggamma = vec![T::zero(); c];
    for (i, (&g, &xh)) in gy.iter().zip(&stats.xhat).enumerate() {
        let ch = (i / plane) % c;
        gbeta[ch] += g;
        ggamma[ch] += g * xh;
    }
    let gx = gy
        .iter()
        .zip(&stats.xhat)
        .enumerate()
        .map(|(i, (&g, &xh))| {
            let ch = (i / plane) % c;
            gamma[ch] * stats.inv_std[ch] / m * (m * g - gbeta[ch] - xh * ggamma[ch])
        })
        .collect();
    (gx, ggamma, gbeta)
}

/// Normalizes with fixed statistics. Returns `(y, xhat, scale)` where
/// `scale = 1 / sqrt(var + eps)` per channel.
pub fn batchnorm_eval_forward<T: Scalar>(
    x: &[T],
    dims: [usize; 4],
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let [_, c, h, w] = dims;
    let plane = h * w;
    let inv: Vec<T> = running_var
        .iter()
        .map(|&v| T::one() / (v + eps).sqrt())
        .collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for (i, &v) in x.iter().enumerate() {
        let ch = (i / plane) % c;
        let xh = (v - running_mean[ch]) * inv[ch];
        xhat.push(xh);
        y.push(gamma[ch] * xh + beta[ch]);
    }
    (y, xhat, inv)
}

pub fn batchnorm_eval_backward<T: Scalar>(
    gy: &[T],
    dims: [usize; 4],
    gamma: &[T],
    xhat: &[T],
    inv: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let [_, c, h, w] = dims;
    let plane = h * w;
    let mut gbeta = vec![T::zero(); c];
    let mut ggamma = vec![T::zero(); c];
    let mut gx = Vec::with_capacity(gy.len());
    for (i, (&g, &xh)) in gy.iter().zip(xhat).enumerate() {
        let ch = (i / plane) % c;
        gbeta[ch] += g;
        ggamma[ch] += g * xh;
        gx.push(g * gamma[ch] * inv[ch]);
    }
    (gx, ggamma, gbeta)
}
