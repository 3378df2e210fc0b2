//! RVSM, the gradient-step ADMM baseline and plain gradient descent on the
//! population loss, each recording a full per-iteration trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::Penalty;
use crate::population::{grad, loss, ProblemSpec};
use crate::rng::{sample_unit_sphere, Rng};
use crate::vector::{angle, RealVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Explicit(RealVector),
    RandomSphere { seed: u64, scale: f64 },
}

impl Init {
    pub fn resolve(&self, d: usize) -> Result<RealVector> {
        let w = match self {
            Init::Explicit(w) => {
                w.ensure_len(d)?;
                w.clone()
            }
            Init::RandomSphere { seed, scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidConfig(format!("init scale must be > 0, got {scale}")));
                }
                sample_unit_sphere(d, &mut Rng::new(*seed)).scale(*scale)
            }
        };
        w.ensure_nondegenerate()?;
        Ok(w)
    }
}

/// Which iterate feeds the u-update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum USource {
    /// `u^{t+1} = prox(w^t)`, as in the algorithm listing.
    #[default]
    PreviousW,
    /// `u^{t+1} = prox(w^{t+1})`.
    CurrentW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RvsmConfig {
    pub eta: f64,
    pub beta: f64,
    pub penalty: Penalty,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub init: Init,
    pub u_source: USource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WUpdate {
    /// One gradient step on the multiplier Lagrangian.
    #[default]
    GradientStep,
    /// Exact minimization over w; not available for this loss.
    ExactArgmin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub eta: f64,
    /// Penalty parameter ρ of the multiplier Lagrangian.
    pub beta: f64,
    pub penalty: Penalty,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub init: Init,
    pub w_update: WUpdate,
}

fn validate_common(eta: f64, beta: f64, penalty: &Penalty, max_iters: usize, stop_tol: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!("eta must be > 0, got {eta}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    if max_iters < 1 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    if !(stop_tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("stop_tol must be >= 0, got {stop_tol}")));
    }
    penalty.validate()
}

impl RvsmConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(self.eta, self.beta, &self.penalty, self.max_iters, self.stop_tol)
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(self.eta, self.beta, &self.penalty, self.max_iters, self.stop_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rvsm,
    Admm,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepTolerance,
    MaxIters,
}

/// State and diagnostics after iteration `t` (`t = 0` is the initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: usize,
    pub w: RealVector,
    pub u: RealVector,
    pub loss: f64,
    pub penalty: f64,
    pub lagrangian: f64,
    pub theta: f64,
    pub norm_w: f64,
    pub gap_wu: f64,
    /// Norm of the w-gradient of the method's Lagrangian.
    pub grad_norm: f64,
    pub nnz_u: usize,
    /// Multiplier norm (ADMM only).
    pub z_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub records: Vec<Record>,
    pub termination: Termination,
    /// `‖w^{T} − w^{T−1}‖` of the last step taken.
    pub final_step_norm: f64,
    pub eta: f64,
    pub beta: f64,
    pub penalty: Penalty,
    pub stop_tol: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory always holds the initial record")
    }

    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::StepTolerance
    }
}

/// `f(w) + λP(u) + (β/2)‖w − u‖²`
pub fn lagrangian(w: &RealVector, u: &RealVector, p: &Penalty, beta: f64, spec: &ProblemSpec) -> Result<f64> {
    u.ensure_len(w.len())?;
    let gap = w.distance(u);
    Ok(loss(w, spec)? + p.value(u) + 0.5 * beta * gap * gap)
}

/// `∇f(w) + β(w − u)`
pub fn lagrangian_grad(w: &RealVector, u: &RealVector, beta: f64, spec: &ProblemSpec) -> Result<RealVector> {
    let diff = w - u;
    Ok(grad(w, spec)?.axpy(beta, &diff))
}

/// One RVSM iteration from `(w, u)`.
pub fn rvsm_step(w: &RealVector, u: &RealVector, cfg: &RvsmConfig, spec: &ProblemSpec) -> Result<(RealVector, RealVector)> {
    let g = lagrangian_grad(w, u, cfg.beta, spec)?;
    let w_next = w.axpy(-cfg.eta, &g);
    if !w_next.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let source = match cfg.u_source {
        USource::PreviousW => w,
        USource::CurrentW => &w_next,
    };
    let u_next = cfg.penalty.prox(source, cfg.beta)?;
    Ok((w_next, u_next))
}

fn record(
    t: usize,
    w: RealVector,
    u: RealVector,
    z: Option<&RealVector>,
    penalty: &Penalty,
    beta: f64,
    spec: &ProblemSpec,
) -> Result<Record> {
    let f = loss(&w, spec)?;
    let pen = penalty.value(&u);
    let gap = w.distance(&u);
    let mut lag = f + pen + 0.5 * beta * gap * gap;
    let mut g = lagrangian_grad(&w, &u, beta, spec)?;
    if let Some(z) = z {
        lag += z.dot(&(&w - &u));
        g = &g + z;
    }
    let rec = Record {
        t,
        theta: angle(&w, spec.w_star())?,
        norm_w: w.norm(),
        nnz_u: u.nnz(),
        loss: f,
        penalty: pen,
        lagrangian: lag,
        gap_wu: gap,
        grad_norm: g.norm(),
        z_norm: z.map(RealVector::norm),
        w,
        u,
    };
    if ![rec.loss, rec.lagrangian, rec.theta, rec.grad_norm].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { iteration: t });
    }
    Ok(rec)
}

fn at(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { .. } => Error::NonFinite { iteration },
        other => Error::AtIteration { iteration, source: Box::new(other) },
    }
}

pub fn run_rvsm(cfg: &RvsmConfig, spec: &ProblemSpec) -> Result<Trajectory> {
    cfg.validate()?;
    let w0 = cfg.init.resolve(spec.dim())?;
    let u0 = cfg.penalty.prox(&w0, cfg.beta)?;
    let mut records = vec![record(0, w0, u0, None, &cfg.penalty, cfg.beta, spec).map_err(at(0))?];
    let mut termination = Termination::MaxIters;
    let mut step = f64::INFINITY;
    for t in 1..=cfg.max_iters {
        let prev = records.last().unwrap();
        let (w, u) = rvsm_step(&prev.w, &prev.u, cfg, spec).map_err(at(t))?;
        step = w.distance(&prev.w);
        records.push(record(t, w, u, None, &cfg.penalty, cfg.beta, spec).map_err(at(t))?);
        if step <= cfg.stop_tol {
            termination = Termination::StepTolerance;
            break;
        }
    }
    Ok(Trajectory {
        method: Method::Rvsm,
        records,
        termination,
        final_step_norm: step,
        eta: cfg.eta,
        beta: cfg.beta,
        penalty: cfg.penalty,
        stop_tol: cfg.stop_tol,
    })
}

/// Multiplier method with a gradient-step w-update:
///
/// ```text
/// w ← w − η(∇f(w) + z + β(w − u))
/// u ← prox(w + z/β)
/// z ← z + β(w − u)
/// ```
pub fn run_admm(cfg: &AdmmConfig, spec: &ProblemSpec) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.w_update == WUpdate::ExactArgmin {
        return Err(Error::Unsupported("exact argmin w-update for the ReLU population loss"));
    }
    let beta = cfg.beta;
    let w0 = cfg.init.resolve(spec.dim())?;
    let u0 = cfg.penalty.prox(&w0, beta)?;
    let mut z = RealVector::zeros(spec.dim());
    let mut records = vec![record(0, w0, u0, Some(&z), &cfg.penalty, beta, spec).map_err(at(0))?];
    let mut termination = Termination::MaxIters;
    let mut step = f64::INFINITY;
    for t in 1..=cfg.max_iters {
        let prev = records.last().unwrap();
        let g = lagrangian_grad(&prev.w, &prev.u, beta, spec).map_err(at(t))?;
        let w = prev.w.axpy(-cfg.eta, &(&g + &z));
        let u = cfg.penalty.prox(&w.axpy(1.0 / beta, &z), beta).map_err(at(t))?;
        let z_next = z.axpy(beta, &(&w - &u));
        if !w.is_finite() || !z_next.is_finite() {
            return Err(Error::NonFinite { iteration: t });
        }
        z = z_next;
        step = w.distance(&prev.w);
        records.push(record(t, w, u, Some(&z), &cfg.penalty, beta, spec).map_err(at(t))?);
        if step <= cfg.stop_tol {
            termination = Termination::StepTolerance;
            break;
        }
    }
    Ok(Trajectory {
        method: Method::Admm,
        records,
        termination,
        final_step_norm: step,
        eta: cfg.eta,
        beta,
        penalty: cfg.penalty,
        stop_tol: cfg.stop_tol,
    })
}

/// Plain gradient descent on `f`. Records carry `u = w` and zero penalty.
pub fn run_gd(eta: f64, init: &RealVector, spec: &ProblemSpec, max_iters: usize, stop_tol: f64) -> Result<Trajectory> {
    let none = Penalty::l1(0.0);
    // β only enters through w − u = 0, so any positive placeholder validates.
    validate_common(eta, 1.0, &none, max_iters, stop_tol)?;
    init.ensure_len(spec.dim())?;
    init.ensure_nondegenerate()?;
    let mut records = vec![record(0, init.clone(), init.clone(), None, &none, 0.0, spec).map_err(at(0))?];
    let mut termination = Termination::MaxIters;
    let mut step = f64::INFINITY;
    for t in 1..=max_iters {
        let prev = records.last().unwrap();
        let w = prev.w.axpy(-eta, &grad(&prev.w, spec).map_err(at(t))?);
        if !w.is_finite() {
            return Err(Error::NonFinite { iteration: t });
        }
        step = w.distance(&prev.w);
        records.push(record(t, w.clone(), w, None, &none, 0.0, spec).map_err(at(t))?);
        if step <= stop_tol {
            termination = Termination::StepTolerance;
            break;
        }
    }
    Ok(Trajectory {
        method: Method::Gd,
        records,
        termination,
        final_step_norm: step,
        eta,
        beta: 0.0,
        penalty: none,
        stop_tol,
    })
}

/// Largest step size admitted by the descent guarantee: `1/(β + L)`.
pub fn auto_step_size(beta: f64, lipschitz: f64) -> f64 {
    1.0 / (beta + lipschitz)
}
