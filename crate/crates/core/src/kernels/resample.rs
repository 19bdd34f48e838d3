//! Bilinear resampling with half-pixel centers and edge clamping.
//!
//! Output coordinate `o` samples the input at `(o + 0.5) * in / out - 0.5`,
//! clamped to `[0, in - 1]`. The same taps serve the network's 2x upsampling
//! and image resizing.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub lo: usize,
    pub hi: usize,
    /// Weight of `hi`; `lo` gets `1 - frac`.
    pub frac: f64,
}

pub fn axis_taps(in_len: usize, out_len: usize) -> Vec<Tap> {
    let ratio = in_len as f64 / out_len as f64;
    let max = (in_len - 1) as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, max);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            Tap {
                lo,
                hi,
                frac: src - lo as f64,
            }
        })
        .collect()
}

/// Resamples each of `planes` planes from `h x w` to `oh x ow`.
pub fn resize_forward<T: Scalar>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
) -> Vec<T> {
    let ty = axis_taps(h, oh);
    let tx = axis_taps(w, ow);
    let mut out = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        for y in &ty {
            let (wy0, wy1) = (T::from_f64_lossy(1.0 - y.frac), T::from_f64_lossy(y.frac));
            let r0 = &src[y.lo * w..(y.lo + 1) * w];
            let r1 = &src[y.hi * w..(y.hi + 1) * w];
            for t in &tx {
                let (wx0, wx1) = (T::from_f64_lossy(1.0 - t.frac), T::from_f64_lossy(t.frac));
                let top = r0[t.lo] * wx0 + r0[t.hi] * wx1;
                let bottom = r1[t.lo] * wx0 + r1[t.hi] * wx1;
                out.push(top * wy0 + bottom * wy1);
            }
        }
    }
    out
}

/// Transpose of [`resize_forward`].
pub fn resize_backward<T: Scalar>(
    gy: &[T],
    planes: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
) -> Vec<T> {
    let ty = axis_taps(h, oh);
    let tx = axis_taps(w, ow);
    let mut gx = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        let g = &gy[p * oh * ow..(p + 1) * oh * ow];
        for (oy, y) in ty.iter().enumerate() {
            let (wy0, wy1) = (T::from_f64_lossy(1.0 - y.frac), T::from_f64_lossy(y.frac));
            for (ox, t) in tx.iter().enumerate() {
                let (wx0, wx1) = (T::from_f64_lossy(1.0 - t.frac), T::from_f64_lossy(t.frac));
                let v = g[oy * ow + ox];
                dst[y.lo * w + t.lo] += v * wy0 * wx0;
                dst[y.lo * w + t.hi] += v * wy0 * wx1;
                dst[y.hi * w + t.lo] += v * wy1 * wx0;
                dst[y.hi * w + t.hi] += v * wy1 * wx1;
            }
        }
    }
    gx
}
