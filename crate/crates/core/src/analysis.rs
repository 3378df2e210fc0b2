//! Checkers that evaluate the convergence claims against recorded
//! trajectories: step-size/angle/β/λ preconditions, monotone descent, the
//! norm annulus, the limit-point identity, O(β) error scaling and the
//! gradient-norm rate.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{lagrangian_grad, run_rvsm, Init, Record, RvsmConfig, Termination, Trajectory, USource};
use crate::penalty::{Penalty, PenaltyKind};
use crate::population::ProblemSpec;
use crate::vector::{angle, RealVector, EPS_NORM};

/// Absolute slack for rounding in monotonicity checks.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionReport {
    /// `η ≤ 1/(β+L)`
    pub eta_ok: bool,
    /// `η ≤ 2/(β+L)`, the weaker bound under which one w-step still descends.
    pub eta_descent_ok: bool,
    /// `θ(w⁰, w*) < π`, i.e. `δ > 0`.
    pub angle_ok: bool,
    pub k_ok: bool,
    /// `β ≤ δ sin δ / (kπ)`
    pub beta_ok: bool,
    /// `λ/β < 1/√d`
    pub lambda_ratio_ok: bool,
    pub theta0: f64,
    pub delta: f64,
    pub l_used: f64,
    pub eta: f64,
    pub eta_bound: f64,
    pub eta_descent_bound: f64,
    pub beta: f64,
    pub beta_bound: f64,
    pub lambda_ratio: f64,
    pub lambda_ratio_bound: f64,
}

impl PreconditionReport {
    pub fn all_ok(&self) -> bool {
        self.eta_ok && self.angle_ok && self.k_ok && self.beta_ok && self.lambda_ratio_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let checks = [
            (self.eta_ok, "eta"),
            (self.angle_ok, "angle"),
            (self.k_ok, "k"),
            (self.beta_ok, "beta"),
            (self.lambda_ratio_ok, "lambda_ratio"),
        ];
        checks.iter().filter(|(ok, _)| !ok).map(|(_, name)| *name).collect()
    }
}

/// `δ sin δ / (kπ)`
pub fn beta_bound(delta: f64, k: usize) -> f64 {
    delta * delta.sin() / (k as f64 * PI)
}

/// Evaluates the descent guarantee's hypotheses. `δ` is taken as
/// `π − θ(w⁰, w*)`, the largest value for which the angle hypothesis holds.
pub fn check_preconditions(
    cfg: &RvsmConfig,
    spec: &ProblemSpec,
    w0: &RealVector,
    lipschitz: f64,
) -> Result<PreconditionReport> {
    let theta0 = angle(w0, spec.w_star())?;
    let delta = PI - theta0;
    let d = spec.dim() as f64;
    let eta_bound = 1.0 / (cfg.beta + lipschitz);
    let eta_descent_bound = 2.0 / (cfg.beta + lipschitz);
    let b_bound = beta_bound(delta, spec.k());
    let lambda_ratio = cfg.penalty.lambda / cfg.beta;
    let lambda_ratio_bound = 1.0 / d.sqrt();
    Ok(PreconditionReport {
        eta_ok: cfg.eta <= eta_bound,
        eta_descent_ok: cfg.eta <= eta_descent_bound,
        angle_ok: delta > 0.0,
        k_ok: spec.k() >= 2,
        beta_ok: cfg.beta <= b_bound,
        lambda_ratio_ok: lambda_ratio < lambda_ratio_bound,
        theta0,
        delta,
        l_used: lipschitz,
        eta: cfg.eta,
        eta_bound,
        eta_descent_bound,
        beta: cfg.beta,
        beta_bound: b_bound,
        lambda_ratio,
        lambda_ratio_bound,
    })
}

/// Builds a configuration satisfying every hypothesis for the given start:
/// `β = beta_fraction · δ sin δ/(kπ)`, `λ = lambda_fraction · β/√d` and
/// `η = 1/(β + L)`.
#[allow(clippy::too_many_arguments)]
pub fn compliant_config(
    spec: &ProblemSpec,
    init: Init,
    kind: PenaltyKind,
    tl1_shape: f64,
    beta_fraction: f64,
    lambda_fraction: f64,
    lipschitz: f64,
    max_iters: usize,
    stop_tol: f64,
) -> Result<RvsmConfig> {
    if !(beta_fraction > 0.0 && beta_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("beta_fraction must be in (0, 1], got {beta_fraction}")));
    }
    if !(0.0..1.0).contains(&lambda_fraction) {
        return Err(Error::InvalidConfig(format!("lambda_fraction must be in [0, 1), got {lambda_fraction}")));
    }
    let w0 = init.resolve(spec.dim())?;
    let delta = PI - angle(&w0, spec.w_star())?;
    let beta = beta_fraction * beta_bound(delta, spec.k());
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig("initial angle leaves no admissible beta".into()));
    }
    let lambda = lambda_fraction * beta / (spec.dim() as f64).sqrt();
    Ok(RvsmConfig {
        eta: 1.0 / (beta + lipschitz),
        beta,
        penalty: Penalty::new(kind, lambda, tl1_shape)?,
        max_iters,
        stop_tol,
        init,
        u_source: USource::PreviousW,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneField {
    Lagrangian,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub ok: bool,
    /// Index `t` of the first record exceeding its predecessor.
    pub first_violation: Option<usize>,
    /// Largest single-step increase (≤ 0 when non-increasing throughout).
    pub max_increase: f64,
}

pub fn check_monotone_series(values: &[f64]) -> MonotoneReport {
    let mut first_violation = None;
    let mut max_increase = f64::NEG_INFINITY;
    for (i, pair) in values.windows(2).enumerate() {
        let inc = pair[1] - pair[0];
        max_increase = max_increase.max(inc);
        if inc > MONOTONE_TOL && first_violation.is_none() {
            first_violation = Some(i + 1);
        }
    }
    if values.len() < 2 {
        max_increase = 0.0;
    }
    MonotoneReport { ok: first_violation.is_none(), first_violation, max_increase }
}

pub fn check_monotone(traj: &Trajectory, field: MonotoneField) -> MonotoneReport {
    let pick = |r: &Record| match field {
        MonotoneField::Lagrangian => r.lagrangian,
        MonotoneField::Angle => r.theta,
    };
    let values: Vec<f64> = traj.records.iter().map(pick).collect();
    check_monotone_series(&values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusReport {
    /// First index from which no deviation exceeds the final one.
    pub t_measured: usize,
    /// `sup_{t ≥ T} |‖wᵗ‖ − ‖w*‖|`
    pub m_measured: f64,
}

/// Measures the radial band around `‖w*‖` that traps the iterate norms.
///
/// The tail supremum of the deviation `|‖wᵗ‖ − ‖w*‖|` is non-increasing in
/// the start index; `T` is the smallest start attaining its minimum (up to
/// [`MONOTONE_TOL`]) and `M` the supremum from there on.
pub fn check_annulus(traj: &Trajectory, spec: &ProblemSpec) -> Result<AnnulusReport> {
    let ns = spec.w_star_norm();
    let norms: Vec<f64> = traj.records.iter().map(|r| r.w.norm()).collect();
    if let Some(t) = norms.iter().position(|&n| n < EPS_NORM) {
        return Err(Error::AnnulusViolation(format!("iterate {t} collapsed to the origin")));
    }
    let last = *norms.last().ok_or_else(|| Error::AnnulusViolation("empty trajectory".into()))?;
    if last > 2.0 * ns {
        return Err(Error::AnnulusViolation(format!("final norm {last} exceeds 2|w*| = {}", 2.0 * ns)));
    }
    let dev: Vec<f64> = norms.iter().map(|n| (n - ns).abs()).collect();
    let final_dev = *dev.last().unwrap();
    let t_measured = dev.iter().rposition(|&x| x > final_dev + MONOTONE_TOL).map_or(0, |i| i + 1);
    let m_measured = dev[t_measured..].iter().copied().fold(0.0, f64::max);
    if m_measured >= ns {
        return Err(Error::AnnulusViolation(format!("band half-width {m_measured} reaches |w*| = {ns}")));
    }
    Ok(AnnulusReport { t_measured, m_measured })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub w_bar: RealVector,
    pub u_bar: RealVector,
    pub theta_bar: f64,
    /// Least-squares scale in `w* ≈ (kπ/(π−θ))β(w̄ − prox(w̄)) + C·w̄`.
    pub c_fit: f64,
    pub residual: f64,
    /// `1/(1 − 2kλ√d)` when the denominator is positive.
    pub c_upper: Option<f64>,
    pub c_in_interval: Option<bool>,
    /// `w̄ − prox(w̄)` has the sign of `w̄` (or vanishes) in every coordinate.
    pub expansion_signs_ok: bool,
    /// `‖∇f(w̄) + β(w̄ − ū)‖`
    pub grad_norm_at_limit: f64,
    pub error_to_truth: f64,
    pub iterations: usize,
}

pub fn limit_residual(traj: &Trajectory, spec: &ProblemSpec, p: &Penalty, beta: f64) -> Result<LimitReport> {
    if traj.termination != Termination::StepTolerance {
        return Err(Error::NotConverged { step_norm: traj.final_step_norm, stop_tol: traj.stop_tol });
    }
    let last = traj.last();
    let w_bar = &last.w;
    let theta = angle(w_bar, spec.w_star())?;
    let k = spec.k() as f64;
    let shrink = w_bar - &p.prox(w_bar, beta)?;
    let lead = shrink.scale(k * PI / (PI - theta) * beta);
    let rest = spec.w_star() - &lead;
    let c_fit = rest.dot(w_bar) / w_bar.dot(w_bar);
    let residual = rest.axpy(-c_fit, w_bar).norm();

    let denom = 1.0 - 2.0 * k * p.lambda * (spec.dim() as f64).sqrt();
    let c_upper = (denom > 0.0).then(|| 1.0 / denom);
    let c_in_interval = c_upper.map(|hi| c_fit > 0.0 && c_fit < hi);
    let expansion_signs_ok = shrink.iter().zip(w_bar.iter()).all(|(s, w)| *s == 0.0 || s.signum() == w.signum());

    Ok(LimitReport {
        w_bar: w_bar.clone(),
        u_bar: last.u.clone(),
        theta_bar: theta,
        c_fit,
        residual,
        c_upper,
        c_in_interval,
        expansion_signs_ok,
        grad_norm_at_limit: lagrangian_grad(w_bar, &last.u, beta, spec)?.norm(),
        error_to_truth: w_bar.distance(spec.w_star()),
        iterations: traj.iterations(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub beta: f64,
    pub lambda: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    /// Slope of `log‖w̄ − w*‖` against `log β`; `None` if some error is zero.
    pub slope: Option<f64>,
    pub points: Vec<ScalingPoint>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if x.len() < 2 || sxx <= 0.0 {
        return Err(Error::DegenerateRegression(x.len()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Runs RVSM for each β with `λ/β` held at the base ratio, and regresses the
/// log limit error on log β.
pub fn beta_error_scaling(base: &RvsmConfig, spec: &ProblemSpec, betas: &[f64]) -> Result<ScalingReport> {
    let mut distinct = betas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateRegression(distinct.len()));
    }
    let ratio = base.penalty.lambda / base.beta;
    let points: Vec<ScalingPoint> = betas
        .par_iter()
        .map(|&beta| {
            let cfg = RvsmConfig { beta, penalty: base.penalty.with_lambda(ratio * beta), ..base.clone() };
            let traj = run_rvsm(&cfg, spec)?;
            let limit = limit_residual(&traj, spec, &cfg.penalty, beta)?;
            Ok(ScalingPoint { beta, lambda: cfg.penalty.lambda, error: limit.error_to_truth })
        })
        .collect::<Result<_>>()?;
    let slope = if points.iter().all(|p| p.error > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| p.beta.ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
        Some(fit_slope(&x, &y)?)
    } else {
        None
    };
    Ok(ScalingReport { slope, points })
}

pub const RATE_PREFIXES: [usize; 3] = [100, 1_000, 10_000];

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// Envelope constant fitted on the shortest prefix: `c = √T₀ · min_{t<T₀} gₜ`.
    pub c_fit: f64,
    pub ok: bool,
    /// `(T, min_{t<T} ‖∇_w L_β‖)` for each prefix the trajectory covers.
    pub prefixes: Vec<(usize, f64)>,
}

/// Checks that the running minimum of the Lagrangian gradient norm stays
/// under the `c/√T` envelope (with 10% slack) at every covered prefix.
///
/// A run that stopped on an exactly zero step sits at a floating-point fixed
/// point, so it covers every prefix: further iterations would repeat it.
pub fn grad_norm_rate(traj: &Trajectory) -> RateReport {
    let grads: Vec<f64> = traj.records.iter().map(|r| r.grad_norm).collect();
    let frozen = traj.termination == Termination::StepTolerance && traj.final_step_norm == 0.0;
    let prefixes: Vec<(usize, f64)> = RATE_PREFIXES
        .iter()
        .filter(|&&t| t <= grads.len() || frozen)
        .map(|&t| (t, grads[..t.min(grads.len())].iter().copied().fold(f64::INFINITY, f64::min)))
        .collect();
    let Some(&(t0, m0)) = prefixes.first() else {
        return RateReport { c_fit: f64::NAN, ok: false, prefixes };
    };
    let c_fit = m0 * (t0 as f64).sqrt();
    let ok = prefixes.iter().all(|&(t, m)| m * (t as f64).sqrt() <= 1.1 * c_fit);
    RateReport { c_fit, ok, prefixes }
}
