//! Software emulation of IEEE 754 binary16 rounding.
//!
//! Values never leave the host scalar type: rounding produces the host
//! value nearest to the input among those representable in binary16.

use crate::scalar::Scalar;

/// Largest finite binary16 value.
pub const F16_MAX: f64 = 65504.0;
/// Smallest positive normal binary16 value, 2^-14.
pub const F16_MIN_POSITIVE: f64 = 6.103_515_625e-5;
/// Spacing of binary16 subnormals, 2^-24.
const F16_SUBNORMAL_STEP: f64 = 5.960_464_477_539_063e-8;
/// Magnitudes at or above this round to infinity (halfway between 65504 and 2^16).
const F16_OVERFLOW: f64 = 65520.0;

/// Rounds an `f64` to the nearest binary16 value, ties to even.
pub fn round_f64(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let a = x.abs();
    let rounded = if a >= F16_OVERFLOW {
        f64::INFINITY
    } else if a < F16_MIN_POSITIVE {
        (a / F16_SUBNORMAL_STEP).round_ties_even() * F16_SUBNORMAL_STEP
    } else {
        let exp = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
        // 10 explicit mantissa bits
        let quantum = f64::powi(2.0, exp - 10);
        (a / quantum).round_ties_even() * quantum
    };
    rounded.copysign(x)
}

#[inline]
pub fn round<T: Scalar>(x: T) -> T {
    T::from_f64_lossy(round_f64(x.as_f64()))
}

pub fn round_slice<T: Scalar>(xs: &mut [T]) {
    for x in xs {
        *x = round(*x);
    }
}

/// True when `x` survives a binary16 round trip unchanged.
pub fn is_representable<T: Scalar>(x: T) -> bool {
    let v = x.as_f64();
    v.is_nan() || round_f64(v) == v
}
