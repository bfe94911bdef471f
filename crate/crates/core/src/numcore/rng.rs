//! Seeded counter-based random source.
//!
//! The generator is SplitMix64 written in counter form: the `i`-th output
//! (1-based) of a stream with seed `s` is
//!
//! ```text
//! mix64(s + i * 0x9E3779B97F4A7C15)      (wrapping arithmetic)
//! mix64(z) = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!            z ^= z >> 27; z *= 0x94D049BB133111EB; z ^ (z >> 31)
//! ```
//!
//! Substreams use `seed = mix64(master ^ mix64(index + 0x6A09E667F3BCC909))`.
//! Because `mix64` is a bijection, distinct indices give distinct seeds and
//! therefore distinct first outputs.
//!
//! Uniforms take the top 53 bits: `u = (x >> 11) * 2^-53` in `[0, 1)`. The
//! Box–Muller radius uses `u1 = ((x >> 11) + 1) * 2^-53` in `(0, 1]` so the
//! logarithm is always finite. Every Gaussian pair consumes exactly two
//! uniforms (`u1` first), the cosine branch is returned first and the sine
//! branch is kept for the next draw.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::Tensor;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0x6A09_E667_F3BC_C909;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Single-owner deterministic random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            counter: 0,
            spare: None,
        }
    }

    /// Independent stream number `index` derived from `master`.
    pub fn substream(master: u64, index: u64) -> Self {
        RngStream::new(mix64(master ^ mix64(index.wrapping_add(STREAM_SALT))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * UNIT
    }

    /// Uniform in `(0, 1]`.
    #[inline]
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * UNIT
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)` (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform();
        let (z0, z1) = box_muller(u1, u2);
        self.spare = Some(z1);
        z0
    }

    /// Tensor of i.i.d. standard normal draws in row-major order.
    pub fn gaussian_tensor(&mut self, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| self.gaussian()).collect();
        Tensor::new(shape.to_vec(), data).expect("shape from caller")
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n` in sampling order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

/// Basic Box–Muller transform: `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let theta = 2.0 * PI * u2;
    (r * libm::cos(theta), r * libm::sin(theta))
}
