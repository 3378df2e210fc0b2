//! Sparsity penalties and their exact proximal (thresholding) operators.
//!
//! Every prox here solves, per coordinate,
//! `argmin_u λ·P(u) + (β/2)(w − u)²`.
//! When two candidates attain the same objective (within [`TIE_RTOL`]),
//! the one with the smaller magnitude wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::RealVector;

/// Relative tolerance under which two objective values count as tied.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    L0,
    /// Transformed ℓ1: `(a+1)|u| / (a+|u|)`.
    Tl1,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 3] = [PenaltyKind::L1, PenaltyKind::L0, PenaltyKind::Tl1];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::L0 => "l0",
            PenaltyKind::Tl1 => "tl1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// Shape parameter; only read for [`PenaltyKind::Tl1`].
    #[serde(default = "default_tl1_shape")]
    pub a: f64,
}

fn default_tl1_shape() -> f64 {
    1.0
}

impl Penalty {
    pub fn new(kind: PenaltyKind, lambda: f64, a: f64) -> Result<Self> {
        let p = Self { kind, lambda, a };
        p.validate()?;
        Ok(p)
    }

    pub fn l1(lambda: f64) -> Self {
        Self { kind: PenaltyKind::L1, lambda, a: 1.0 }
    }

    pub fn l0(lambda: f64) -> Self {
        Self { kind: PenaltyKind::L0, lambda, a: 1.0 }
    }

    pub fn tl1(lambda: f64, a: f64) -> Self {
        Self { kind: PenaltyKind::Tl1, lambda, a }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        // λ = 0 is admitted: it is the penalty-free limit used as a baseline.
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("tl1 shape a must be > 0, got {}", self.a)));
        }
        Ok(())
    }

    /// `λ·P(x)` for one coordinate.
    pub fn scalar_value(&self, x: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 => self.lambda * x.abs(),
            PenaltyKind::L0 => {
                if x != 0.0 {
                    self.lambda
                } else {
                    0.0
                }
            }
            PenaltyKind::Tl1 => self.lambda * (self.a + 1.0) * x.abs() / (self.a + x.abs()),
        }
    }

    pub fn value(&self, u: &RealVector) -> f64 {
        u.iter().map(|&x| self.scalar_value(x)).sum()
    }

    /// Scalar prox objective `λP(u) + (β/2)(w − u)²`.
    pub fn prox_objective(&self, u: f64, w: f64, beta: f64) -> f64 {
        self.scalar_value(u) + 0.5 * beta * (w - u) * (w - u)
    }

    /// Threshold below which the prox returns exactly zero.
    pub fn threshold(&self, beta: f64) -> f64 {
        let t = self.lambda / beta;
        match self.kind {
            PenaltyKind::L1 => t,
            PenaltyKind::L0 => (2.0 * t).sqrt(),
            PenaltyKind::Tl1 => {
                let a = self.a;
                if t <= a * a / (2.0 * (a + 1.0)) {
                    t * (a + 1.0) / a
                } else {
                    (2.0 * t * (a + 1.0)).sqrt() - a / 2.0
                }
            }
        }
    }

    pub fn prox_scalar(&self, w: f64, beta: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 => {
                let t = self.lambda / beta;
                if w.abs() > t {
                    w.signum() * (w.abs() - t)
                } else {
                    0.0
                }
            }
            PenaltyKind::L0 => {
                if w.abs() > (2.0 * self.lambda / beta).sqrt() {
                    w
                } else {
                    0.0
                }
            }
            PenaltyKind::Tl1 => w.signum() * tl1_prox_magnitude(self.lambda, self.a, beta, w.abs()),
        }
    }

    /// Component-wise prox with weight `β`.
    pub fn prox(&self, w: &RealVector, beta: f64) -> Result<RealVector> {
        if !(beta > 0.0) {
            return Err(Error::InvalidBeta(beta));
        }
        Ok(w.map(|x| self.prox_scalar(x, beta)))
    }
}

/// Magnitude minimizer of `h(x) = λ(a+1)x/(a+x) + (β/2)(x − y)²` over `x ≥ 0`.
///
/// `h'` is convex on `[0, ∞)` (its third derivative is positive) and
/// `h'(y) > 0`, so `h` has at most two local minima on `[0, y]`: the origin
/// and the upper root of `h'`. The root is bracketed and bisected, then the
/// two candidates are compared.
fn tl1_prox_magnitude(lambda: f64, a: f64, beta: f64, y: f64) -> f64 {
    if y == 0.0 || lambda == 0.0 {
        return y;
    }
    let c = lambda * (a + 1.0);
    let h = |x: f64| c * x / (a + x) + 0.5 * beta * (x - y) * (x - y);
    let dh = |x: f64| c * a / ((a + x) * (a + x)) + beta * (x - y);

    // minimiser of h' on [0, y]
    let x_min = ((2.0 * c * a / beta).cbrt() - a).clamp(0.0, y);
    if dh(x_min) >= 0.0 {
        // h non-decreasing on [0, y]
        return 0.0;
    }
    let (mut lo, mut hi) = (x_min, y);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dh(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let interior = if h(lo) <= h(hi) { lo } else { hi };
    let (h0, hi_val) = (h(0.0), h(interior));
    if hi_val < h0 - TIE_RTOL * h0.abs().max(hi_val.abs()) {
        interior
    } else {
        0.0
    }
}

/// Brute-force scalar prox: scan a grid over `[lo, hi]`, then refine the best
/// grid point with a ternary search on its two neighbouring cells.
///
/// Ties (within [`TIE_RTOL`]) go to the candidate with smaller `|u|`.
pub fn prox_grid_oracle(
    p: &Penalty,
    w: f64,
    beta: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<f64> {
    if !(lo < hi && step > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidRange { lo, hi, step });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let obj = |u: f64| p.prox_objective(u, w, beta);
    let better = |cand: f64, cand_obj: f64, best: f64, best_obj: f64| {
        let tol = TIE_RTOL * cand_obj.abs().max(best_obj.abs());
        cand_obj < best_obj - tol || (cand_obj <= best_obj + tol && cand.abs() < best.abs())
    };

    let n = ((hi - lo) / step).floor() as usize;
    let mut best = lo;
    let mut best_obj = obj(lo);
    let consider = |u: f64, best: &mut f64, best_obj: &mut f64| {
        let o = obj(u);
        if better(u, o, *best, *best_obj) {
            *best = u;
            *best_obj = o;
        }
    };
    for i in 1..=n {
        consider(lo + i as f64 * step, &mut best, &mut best_obj);
    }
    consider(hi, &mut best, &mut best_obj);

    // refine the scan winner before the origin can displace it; near the ℓ0
    // threshold the origin beats every grid point but not the refined one
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if obj(m1) <= obj(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let refined = 0.5 * (a + b);
    consider(refined, &mut best, &mut best_obj);
    if lo <= 0.0 && hi >= 0.0 {
        consider(0.0, &mut best, &mut best_obj);
    }
    Ok(best)
}

/// Oracle over the sufficient range `[−|w|−1, |w|+1]`.
pub fn prox_grid_oracle_default(p: &Penalty, w: f64, beta: f64, step: f64) -> Result<f64> {
    let r = w.abs() + 1.0;
    prox_grid_oracle(p, w, beta, -r, r, step)
}
