use crate::scalar::Scalar;

/// 2x2 max pooling with stride 2 over `planes` planes of `h x w`.
///
/// Returns the pooled values and, per output cell, the flat input index of
/// the selected element. Ties go to the first element in row-major window order.
pub fn maxpool2x2_forward<T: Scalar>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn maxpool2x2_backward<T: Scalar>(gy: &[T], argmax: &[usize], input_len: usize) -> Vec<T> {
    let mut gx = vec![T::zero(); input_len];
    for (&g, &i) in gy.iter().zip(argmax) {
        gx[i] += g;
    }
    gx
}
