//! Oracle certification suites: prox against the brute-force grid search,
//! the analytic gradient against central differences, and the closed forms
//! against Monte-Carlo estimates. All seeds are fixed.

use rayon::prelude::*;
use serde::Serialize;

use crate::empirical::{estimate_g, estimate_loss};
use crate::penalty::{prox_grid_oracle_default, Penalty, PenaltyKind};
use crate::population::{critical_points, finite_diff_grad, g_closed, grad, loss, CriticalKind, ProblemSpec};
use crate::rng::{sample_unit_sphere, Rng};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    /// Worst observed value of the suite's metric.
    pub worst: f64,
    /// The gate the metric is held to.
    pub gate: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyPlan {
    pub prox_scalars: usize,
    pub prox_step: f64,
    pub grad_points: usize,
    pub mc_samples: u64,
    pub mc_instances: usize,
}

impl CertifyPlan {
    pub fn full() -> Self {
        Self { prox_scalars: 1000, prox_step: 1e-5, grad_points: 100, mc_samples: 100_000, mc_instances: 50 }
    }

    pub fn quick() -> Self {
        Self { prox_scalars: 100, prox_step: 1e-4, grad_points: 10, mc_samples: 1_000, mc_instances: 20 }
    }
}

pub const PROX_TOL: f64 = 1e-4;
pub const PROX_OBJ_SLACK: f64 = 1e-8;
pub const GRAD_STEP: f64 = 1e-6;
pub const GRAD_RTOL: f64 = 1e-5;
pub const STATIONARY_TOL: f64 = 1e-9;
pub const MC_SIGMAS: f64 = 4.0;

/// Scalar prox under test: `(penalty, w, β) ↦ u`.
pub type ScalarProx = dyn Fn(&Penalty, f64, f64) -> f64 + Sync;

/// Random prox cases for one penalty kind: `(penalty, w, β)`. One in ten sits
/// on (or a relative 1e-9 either side of) the zeroing threshold.
pub fn prox_cases(kind: PenaltyKind, n: usize, seed: u64) -> Vec<(Penalty, f64, f64)> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let lambda = rng.uniform_in(0.01, 1.0);
            let beta = rng.uniform_in(0.2, 5.0);
            let a = rng.uniform_in(0.5, 3.0);
            let p = Penalty { kind, lambda, a };
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let w = if i % 10 == 9 {
                let t = p.threshold(beta);
                let nudge = [1.0, 1.0 - 1e-9, 1.0 + 1e-9][(i / 10) % 3];
                sign * t * nudge
            } else {
                rng.uniform_in(-2.0, 2.0)
            };
            (p, w, beta)
        })
        .collect()
}

pub fn prox_suite(kind: PenaltyKind, prox: &ScalarProx, n: usize, step: f64) -> SuiteResult {
    let cases = prox_cases(kind, n, 1000 + kind as u64);
    let errors: Vec<(f64, bool)> = cases
        .par_iter()
        .map(|(p, w, beta)| {
            let u = prox(p, *w, *beta);
            let oracle = prox_grid_oracle_default(p, *w, *beta, step).expect("valid oracle range");
            let err = (u - oracle).abs();
            let obj_ok = p.prox_objective(u, *w, *beta) <= p.prox_objective(oracle, *w, *beta) + PROX_OBJ_SLACK;
            (err, err <= PROX_TOL && obj_ok)
        })
        .collect();
    SuiteResult {
        name: format!("prox/{}", kind.name()),
        checks: errors.len(),
        failures: errors.iter().filter(|(_, ok)| !ok).count(),
        worst: errors.iter().map(|(e, _)| *e).fold(0.0, f64::max),
        gate: PROX_TOL,
    }
}

/// Relative central-difference error at random points over the (d, k) grid,
/// plus exact stationarity at `w*` and at the saddle.
pub fn grad_suite(dims: &[usize], ks: &[usize], points: usize) -> Vec<SuiteResult> {
    let mut out = Vec::new();
    let mut fd_errors = Vec::new();
    for &d in dims {
        for &k in ks {
            let seed = (d * 100 + k) as u64;
            let mut rng = Rng::new(seed);
            let spec = ProblemSpec::random(d, k, &mut rng).expect("unit ground truth");
            for _ in 0..points {
                let w = sample_unit_sphere(d, &mut rng).scale(rng.uniform_in(0.3, 2.0));
                let g = grad(&w, &spec).expect("nonzero point");
                let fd = finite_diff_grad(&w, &spec, GRAD_STEP).expect("nonzero point");
                fd_errors.push(fd.distance(&g) / g.norm());
            }
        }
    }
    out.push(SuiteResult {
        name: "grad/finite-diff".into(),
        checks: fd_errors.len(),
        failures: fd_errors.iter().filter(|e| !(**e <= GRAD_RTOL)).count(),
        worst: fd_errors.iter().copied().fold(0.0, f64::max),
        gate: GRAD_RTOL,
    });

    let mut zero_norms = Vec::new();
    for k in [2usize, 4] {
        for (d, seed) in [(4usize, 1u64), (16, 2), (64, 3)] {
            let spec = ProblemSpec::random(d, k, &mut Rng::new(seed)).expect("unit ground truth");
            for (p, kind) in critical_points(&spec) {
                if kind != CriticalKind::LocalMax {
                    zero_norms.push(grad(&p, &spec).expect("nonzero point").norm());
                }
            }
        }
    }
    out.push(SuiteResult {
        name: "grad/stationary".into(),
        checks: zero_norms.len(),
        failures: zero_norms.iter().filter(|n| !(**n <= STATIONARY_TOL)).count(),
        worst: zero_norms.iter().copied().fold(0.0, f64::max),
        gate: STATIONARY_TOL,
    });
    out
}

/// Closed-form `g` and `f` against Monte-Carlo means, gated at
/// [`MC_SIGMAS`] standard errors. The gate is relative to the measured
/// standard error, so smaller `n` widens it automatically.
pub fn mc_suite(instances: usize, n: u64) -> Vec<SuiteResult> {
    const DIMS: [usize; 3] = [2, 4, 8];
    const KS: [usize; 3] = [1, 2, 8];
    let g_z: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let d = DIMS[i % 3];
            let mut rng = Rng::with_stream(77, i as u64);
            let u = sample_unit_sphere(d, &mut rng).scale(rng.uniform_in(0.5, 2.0));
            let v = sample_unit_sphere(d, &mut rng).scale(rng.uniform_in(0.5, 2.0));
            let est = estimate_g(&u, &v, n, 5000 + i as u64, 4).expect("valid sample count");
            est.z_score(g_closed(&u, &v).expect("nonzero vectors"))
        })
        .collect();
    let f_z: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let d = DIMS[i % 3];
            let k = KS[(i / 3) % 3];
            let mut rng = Rng::with_stream(78, i as u64);
            let spec = ProblemSpec::random(d, k, &mut rng).expect("unit ground truth");
            let w = sample_unit_sphere(d, &mut rng).scale(rng.uniform_in(0.3, 2.0));
            let est = estimate_loss(&w, &spec, n, 9000 + i as u64, 4).expect("valid sample count");
            est.z_score(loss(&w, &spec).expect("nonzero point"))
        })
        .collect();
    [("mc/g", g_z), ("mc/loss", f_z)]
        .into_iter()
        .map(|(name, z)| SuiteResult {
            name: name.into(),
            checks: z.len(),
            failures: z.iter().filter(|s| !(**s <= MC_SIGMAS)).count(),
            worst: z.iter().copied().fold(0.0, f64::max),
            gate: MC_SIGMAS,
        })
        .collect()
}

pub fn run_all(plan: &CertifyPlan, prox: &ScalarProx) -> Vec<SuiteResult> {
    let mut out: Vec<SuiteResult> = PenaltyKind::ALL
        .iter()
        .map(|&kind| prox_suite(kind, prox, plan.prox_scalars, plan.prox_step))
        .collect();
    out.extend(grad_suite(&[2, 8, 64], &[1, 2, 8], plan.grad_points));
    out.extend(mc_suite(plan.mc_instances, plan.mc_samples));
    out
}

pub fn reference_prox(p: &Penalty, w: f64, beta: f64) -> f64 {
    p.prox_scalar(w, beta)
}

pub fn format_table(results: &[SuiteResult]) -> String {
    let mut s = format!("{:<20} {:>7} {:>9} {:>12} {:>10}  status\n", "suite", "checks", "failures", "worst", "gate");
    for r in results {
        s.push_str(&format!(
            "{:<20} {:>7} {:>9} {:>12.3e} {:>10.1e}  {}\n",
            r.name,
            r.checks,
            r.failures,
            r.worst,
            r.gate,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_plan_passes() {
        let results = run_all(&CertifyPlan::quick(), &reference_prox);
        assert!(results.iter().all(SuiteResult::passed), "{}", format_table(&results));
    }

    #[test]
    fn mutated_hard_threshold_is_caught() {
        let mutated = |p: &Penalty, w: f64, beta: f64| match p.kind {
            PenaltyKind::L0 => {
                if w.abs() > (p.lambda / beta).sqrt() {
                    w
                } else {
                    0.0
                }
            }
            _ => p.prox_scalar(w, beta),
        };
        let r = prox_suite(PenaltyKind::L0, &mutated, 200, 1e-4);
        assert!(!r.passed());
        assert!(prox_suite(PenaltyKind::L1, &mutated, 50, 1e-4).passed());
    }

    #[test]
    fn boundary_cases_are_generated() {
        let cases = prox_cases(PenaltyKind::Tl1, 30, 1);
        let on_threshold = cases.iter().filter(|(p, w, b)| w.abs() == p.threshold(*b)).count();
        assert!(on_threshold >= 1);
    }

    #[test]
    fn table_marks_failures() {
        let r = SuiteResult { name: "x".into(), checks: 3, failures: 1, worst: 2.0, gate: 1.0 };
        assert!(format_table(&[r]).contains("FAIL"));
    }
}
