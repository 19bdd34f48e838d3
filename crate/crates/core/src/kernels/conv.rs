//! Direct convolution through im2col + GEMM (cross-correlation, zero padding).

use crate::scalar::Scalar;

/// Geometry of a 2-d convolution `[N, Cin, H, W] -> [N, Cout, Hout, Wout]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }

    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let hw = oh * ow;
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *o = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, x: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let hw = oh * ow;
    for ci in 0..g.cin {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `y = conv(x, weight) + bias` with `weight: [Cout, Cin, K, K]`.
pub fn conv2d_forward<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    g: &ConvGeom,
) -> Vec<T> {
    let hw = g.out_h() * g.out_w();
    let patch = g.patch();
    let in_plane = g.cin * g.h * g.w;
    let out_plane = g.cout * hw;
    let mut out = vec![T::zero(); g.n * out_plane];
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); patch * hw]
    };
    for s in 0..g.n {
        let xs = &x[s * in_plane..(s + 1) * in_plane];
        let rhs: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, g, &mut cols);
            &cols
        };
        let ys = &mut out[s * out_plane..(s + 1) * out_plane];
        if let Some(b) = bias {
            for (co, row) in ys.chunks_mut(hw).enumerate() {
                row.fill(b[co]);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        T::gemm(
            g.cout,
            patch,
            hw,
            T::one(),
            weight,
            patch as isize,
            1,
            rhs,
            hw as isize,
            1,
            beta,
            ys,
            hw as isize,
            1,
        );
    }
    out
}

/// Gradient of `conv2d_forward` with respect to its input only.
pub fn conv2d_backward_input<T: Scalar>(gy: &[T], weight: &[T], g: &ConvGeom) -> Vec<T> {
    let hw = g.out_h() * g.out_w();
    let patch = g.patch();
    let in_plane = g.cin * g.h * g.w;
    let out_plane = g.cout * hw;
    let mut gx = vec![T::zero(); g.n * in_plane];
    let mut gcols = vec![T::zero(); patch * hw];
    for s in 0..g.n {
        let gys = &gy[s * out_plane..(s + 1) * out_plane];
        let gxs = &mut gx[s * in_plane..(s + 1) * in_plane];
        if g.is_pointwise() {
            T::gemm(
                patch,
                g.cout,
                hw,
                T::one(),
                weight,
                1,
                patch as isize,
                gys,
                hw as isize,
                1,
                T::zero(),
                gxs,
                hw as isize,
                1,
            );
        } else {
            T::gemm(
                patch,
                g.cout,
                hw,
                T::one(),
                weight,
                1,
                patch as isize,
                gys,
                hw as isize,
                1,
                T::zero(),
                &mut gcols,
                hw as isize,
                1,
            );
            col2im(&gcols, g, gxs);
        }
    }
    gx
}

/// Gradients of `conv2d_forward` with respect to weight and bias.
pub fn conv2d_backward_params<T: Scalar>(x: &[T], gy: &[T], g: &ConvGeom) -> (Vec<T>, Vec<T>) {
    let hw = g.out_h() * g.out_w();
    let patch = g.patch();
    let in_plane = g.cin * g.h * g.w;
    let out_plane = g.cout * hw;
    let mut gw = vec![T::zero(); g.cout * patch];
    let mut gb = vec![T::zero(); g.cout];
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); patch * hw]
    };
    for s in 0..g.n {
        let xs = &x[s * in_plane..(s + 1) * in_plane];
        let gys = &gy[s * out_plane..(s + 1) * out_plane];
        let rhs: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, g, &mut cols);
            &cols
        };
        T::gemm(
            g.cout,
            hw,
            patch,
            T::one(),
            gys,
            hw as isize,
            1,
            rhs,
            1,
            hw as isize,
            T::one(),
            &mut gw,
            patch as isize,
            1,
        );
        for (co, row) in gys.chunks(hw).enumerate() {
            gb[co] += row.iter().copied().sum::<T>();
        }
    }
    (gw, gb)
}

/// Geometry of the transposed convolution whose forward map is the
/// input-gradient of the convolution described by `g`.
///
/// `weight` is shared with that convolution: `[Cout, Cin, K, K]` of the forward
/// convolution reads as `[in, out, K, K]` of the transposed one.
#[allow(clippy::too_many_arguments)]
pub fn transposed_geom(
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> ConvGeom {
    ConvGeom {
        n,
        cin: cout,
        h: (h - 1) * stride + k - 2 * pad,
        w: (w - 1) * stride + k - 2 * pad,
        cout: cin,
        k,
        stride,
        pad,
    }
}

/// Transposed convolution; `g` is the geometry of the adjoint convolution
/// (see [`transposed_geom`]).
pub fn conv_transpose2d_forward<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    g: &ConvGeom,
) -> Vec<T> {
    let mut y = conv2d_backward_input(x, weight, g);
    if let Some(b) = bias {
        let plane = g.h * g.w;
        for (i, chunk) in y.chunks_mut(plane).enumerate() {
            let c = b[i % g.cin];
            chunk.iter_mut().for_each(|v| *v += c);
        }
    }
    y
}

pub fn conv_transpose2d_backward_input<T: Scalar>(gy: &[T], weight: &[T], g: &ConvGeom) -> Vec<T> {
    conv2d_forward(gy, weight, None, g)
}

/// Gradients with respect to weight and bias of the transposed convolution.
pub fn conv_transpose2d_backward_params<T: Scalar>(
    x: &[T],
    gy: &[T],
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>) {
    // d<y, gy>/dW for y = conv^T(x) equals the weight gradient of conv(gy)
    // against upstream x.
    let (gw, _) = conv2d_backward_params(gy, x, g);
    let plane = g.h * g.w;
    let mut gb = vec![T::zero(); g.cin];
    for (i, chunk) in gy.chunks(plane).enumerate() {
        gb[i % g.cin] += chunk.iter().copied().sum::<T>();
    }
    (gw, gb)
}
