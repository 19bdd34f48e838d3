use crate::scalar::Scalar;

pub fn l1_forward<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let n = T::from_usize(pred.len()).unwrap();
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| (p - t).abs())
        .sum::<T>()
        / n
}

/// `sign(pred - target) / n`, zero at ties, scaled by the upstream gradient.
/// NaN differences stay NaN so overflow remains visible downstream.
pub fn l1_backward<T: Scalar>(pred: &[T], target: &[T], upstream: T) -> Vec<T> {
    let scale = upstream / T::from_usize(pred.len()).unwrap();
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            if (p - t).is_nan() {
                T::nan()
            } else if p > t {
                scale
            } else if p < t {
                -scale
            } else {
                T::zero()
            }
        })
        .collect()
}
