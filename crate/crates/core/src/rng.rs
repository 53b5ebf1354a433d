//! Variate generation on top of any [`RngCore`].

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`; safe to take the logarithm of.
#[inline]
pub fn open_unit(rng: &mut dyn RngCore) -> f64 {
    1.0 - unit(rng)
}

/// Standard normal draw by the Box–Muller transform (one variate per two
/// uniforms, the sine branch is discarded so draws stay stateless).
#[inline]
pub fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    let u1 = open_unit(rng);
    let u2 = unit(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Exponential draw with the given mean.
#[inline]
pub fn exponential(rng: &mut dyn RngCore, mean: f64) -> f64 {
    -mean * open_unit(rng).ln()
}

/// Seeded generator for one replicate: ChaCha8 keyed by `seed`, with the
/// replicate index selecting the stream. Distinct replicates therefore draw
/// from disjoint streams regardless of execution order.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// SplitMix64, used by the Monte Carlo quadrature check and in tests.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
