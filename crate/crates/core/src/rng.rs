//! Seeded, splittable randomness.
//!
//! One root [`Rng`] per experiment; every component (partitioner, weight
//! init, noise, sampling) forks its own stream by label. A fork is derived
//! from the root *seed*, not from stream state, so adding a consumer never
//! shifts the draws of another.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Deterministic random stream (ChaCha12 keyed by a 64-bit seed).
///
/// Identical seed gives an identical draw sequence on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: ChaCha12Rng,
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stream: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Child stream keyed by `(seed, label)`; independent of fork order
    /// and of how much this stream has been consumed.
    pub fn fork(&self, label: &str) -> Rng {
        Rng::new(splitmix64(self.seed ^ fnv1a(label)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.stream.random::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.stream.sample(StandardNormal)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        self.stream.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}
