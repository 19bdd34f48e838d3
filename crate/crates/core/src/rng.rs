//! Keyed, order-independent random streams.
//!
//! Every stream is a ChaCha8 generator whose key is derived from a base seed
//! and a string or integer label, so draws for one label never depend on how
//! many other labels were processed first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn keyed(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(fnv1a(label.as_bytes()))))
}

pub fn keyed_u64(seed: u64, label: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix64(
        seed ^ mix64(label.wrapping_add(0x5851_f42d_4c95_7f2d)),
    ))
}

/// Uniform draw in `(0, 1]`.
pub fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    // 53 random bits, shifted off zero
    ((rng.gen::<u64>() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal pairs via Box–Muller.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = open_unit(&mut self.rng);
        let u2 = open_unit(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
