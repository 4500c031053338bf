//! Angle helpers and seed derivation shared across modules.

use core::f64::consts::{PI, TAU};

use rand::Rng;

/// Maps any finite angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut r = (x + PI) % TAU;
    if r < 0.0 {
        r += TAU;
    }
    r -= PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Absolute angular distance on the circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Uniform draw from `(-π, π]`.
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    PI - TAU * u
}

/// Mixes a base seed with a stream tag (splitmix64 finalizer) so that every
/// network, environment and noise source gets an independent stream.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
