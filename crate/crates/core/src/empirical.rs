//! Monte-Carlo ground truth for the closed forms: the actual no-overlap
//! network and sampled expectations with standard errors.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::population::ProblemSpec;
use crate::rng::Rng;
use crate::vector::RealVector;

/// Sample mean with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Distance from `value` in units of standard error (0 when both the
    /// distance and the error vanish).
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }
}

/// Single-pass mean/variance accumulator (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        McEstimate {
            mean: self.mean,
            std_error: (self.sample_variance() / self.n as f64).sqrt(),
            n_samples: self.n,
            seed,
        }
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Network output on `x ∈ R^{k·d}`: the average ReLU response of the shared
/// filter `w` over `k` contiguous non-overlapping patches.
pub fn net_output(x: &[f64], w: &[f64], k: usize) -> Result<f64> {
    let d = w.len();
    if x.len() != k * d {
        return Err(Error::ShapeMismatch { expected: k * d, got: x.len() });
    }
    let total: f64 = x
        .chunks_exact(d)
        .map(|patch| relu(patch.iter().zip(w).map(|(a, b)| a * b).sum()))
        .sum();
    Ok(total / k as f64)
}

/// Estimate of `E[σ(u·x) σ(v·x)]` from `n` Gaussian draws.
pub fn empirical_g(u: &RealVector, v: &RealVector, n: u64, rng: &mut Rng) -> Result<Welford> {
    v.ensure_len(u.len())?;
    let mut acc = Welford::default();
    let mut x = vec![0.0; u.len()];
    for _ in 0..n {
        x.iter_mut().for_each(|xi| *xi = rng.normal());
        let a = relu(u.iter().zip(&x).map(|(p, q)| p * q).sum());
        let b = relu(v.iter().zip(&x).map(|(p, q)| p * q).sum());
        acc.push(a * b);
    }
    Ok(acc)
}

/// Estimate of the population loss at `w` from `n` Gaussian inputs.
pub fn empirical_loss(w: &RealVector, spec: &ProblemSpec, n: u64, rng: &mut Rng) -> Result<Welford> {
    w.ensure_len(spec.dim())?;
    let k = spec.k();
    let mut acc = Welford::default();
    let mut x = vec![0.0; k * spec.dim()];
    for _ in 0..n {
        x.iter_mut().for_each(|xi| *xi = rng.normal());
        let diff = net_output(&x, w.as_slice(), k)? - net_output(&x, spec.w_star().as_slice(), k)?;
        acc.push(diff * diff);
    }
    Ok(acc)
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidConfig(format!("Monte-Carlo needs n >= 2, got {n}")))
    } else {
        Ok(())
    }
}

/// Split `n` samples over `chunks` independent streams of `seed` and merge.
/// The result depends only on `(seed, n, chunks)`, not on scheduling.
fn chunked<F>(n: u64, seed: u64, chunks: u64, f: F) -> Result<McEstimate>
where
    F: Fn(u64, &mut Rng) -> Result<Welford> + Sync,
{
    check_n(n)?;
    let chunks = chunks.clamp(1, n);
    let base = n / chunks;
    let rem = n % chunks;
    let parts: Vec<Welford> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let m = base + u64::from(c < rem);
            f(m, &mut Rng::with_stream(seed, c))
        })
        .collect::<Result<_>>()?;
    let mut total = Welford::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.estimate(seed))
}

pub fn estimate_g(u: &RealVector, v: &RealVector, n: u64, seed: u64, chunks: u64) -> Result<McEstimate> {
    chunked(n, seed, chunks, |m, rng| empirical_g(u, v, m, rng))
}

pub fn estimate_loss(w: &RealVector, spec: &ProblemSpec, n: u64, seed: u64, chunks: u64) -> Result<McEstimate> {
    chunked(n, seed, chunks, |m, rng| empirical_loss(w, spec, m, rng))
}
