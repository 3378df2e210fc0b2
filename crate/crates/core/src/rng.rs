//! Seeded random generation.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64` and
//! optionally placed on an independent stream. Normal deviates come from the
//! `rand_distr` ziggurat sampler. Both are value-stable across platforms for
//! pinned crate versions, so a seed reproduces the same stream everywhere.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vector::{RealVector, EPS_NORM};

#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream `stream` derived from `seed`, for parallel workers
    /// and for separating the ground-truth draw from the initialization draw.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// `n` independent standard normals.
pub fn sample_gaussian(n: usize, rng: &mut Rng) -> RealVector {
    assert!(n >= 1, "sample_gaussian needs n >= 1");
    RealVector::from_raw((0..n).map(|_| rng.normal()).collect())
}

/// Uniform draw from the unit sphere in `d` dimensions (normalized Gaussian).
pub fn sample_unit_sphere(d: usize, rng: &mut Rng) -> RealVector {
    assert!(d >= 1, "sample_unit_sphere needs d >= 1");
    loop {
        let g = sample_gaussian(d, rng);
        let n = g.norm();
        if n >= EPS_NORM {
            return g.map(|x| x / n);
        }
    }
}
