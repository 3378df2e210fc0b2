//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one `[PASS]`/`[FAIL]` line per criterion; exits non-zero if any fail.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use rvsm::analysis::{
    beta_bound, beta_error_scaling, check_annulus, check_monotone, compliant_config, grad_norm_rate,
    limit_residual, MonotoneField,
};
use rvsm::certify::{self, CertifyPlan};
use rvsm::cli::sweep::{run_sweep, Grid, SUMMARY_COLUMNS};
use rvsm::cli::{cmd_run, ExperimentConfig};
use rvsm::optim::{run_rvsm, Init, RvsmConfig, Trajectory};
use rvsm::penalty::PenaltyKind;
use rvsm::population::{lipschitz_bound, ProblemSpec};
use rvsm::rng::{sample_unit_sphere, Rng};
use rvsm::vector::angle;

const SEEDS: u64 = 20;
const DESCENT_ITERS: usize = 10_000;
const LIMIT_ITERS: usize = 200_000;
const LIMIT_STOP_TOL: f64 = 1e-12;
const BETA_FRACTION: f64 = 0.5;
const LAMBDA_FRACTION: f64 = 0.5;
const LIPSCHITZ_RADIUS: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn instance(d: usize, k: usize, seed: u64) -> ProblemSpec {
    ProblemSpec::new(sample_unit_sphere(d, &mut Rng::with_stream(seed, 1)), k).unwrap()
}

fn compliant(spec: &ProblemSpec, seed: u64, kind: PenaltyKind, iters: usize, stop_tol: f64) -> RvsmConfig {
    let l = lipschitz_bound(LIPSCHITZ_RADIUS, spec).unwrap();
    let init = Init::RandomSphere { seed, scale: 1.0 };
    compliant_config(spec, init, kind, 1.0, BETA_FRACTION, LAMBDA_FRACTION, l, iters, stop_tol).unwrap()
}

fn runtime_gate(name: &str, elapsed: Duration, limit_s: f64) -> Option<String> {
    (elapsed.as_secs_f64() > limit_s).then(|| format!("{name} took {:.1}s > {limit_s}s", elapsed.as_secs_f64()))
}

fn suites(results: &[certify::SuiteResult]) -> String {
    results.iter().map(|r| format!("{} worst {:.2e}/{:.0e}", r.name, r.worst, r.gate)).collect::<Vec<_>>().join("; ")
}

fn criterion_1() -> Outcome {
    let plan = CertifyPlan::full();
    let start = Instant::now();
    let res = certify::mc_suite(plan.mc_instances, plan.mc_samples);
    let slow = runtime_gate("mc", start.elapsed(), 60.0);
    let pass = res.iter().all(|r| r.passed() && r.checks == 50) && slow.is_none();
    outcome(pass, format!("{} ({:.1}s){}", suites(&res), start.elapsed().as_secs_f64(), slow.unwrap_or_default()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let res = certify::grad_suite(&[2, 8, 64], &[1, 2, 8], 100);
    let slow = runtime_gate("grad", start.elapsed(), 10.0);
    let pass = res.iter().all(certify::SuiteResult::passed) && res[0].checks == 900 && slow.is_none();
    outcome(pass, format!("{} ({:.1}s){}", suites(&res), start.elapsed().as_secs_f64(), slow.unwrap_or_default()))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let res: Vec<_> = PenaltyKind::ALL
        .iter()
        .map(|&kind| certify::prox_suite(kind, &certify::reference_prox, 1000, 1e-5))
        .collect();
    let slow = runtime_gate("prox", start.elapsed(), 30.0);
    let pass = res.iter().all(certify::SuiteResult::passed) && slow.is_none();
    outcome(pass, format!("{} ({:.1}s){}", suites(&res), start.elapsed().as_secs_f64(), slow.unwrap_or_default()))
}

/// Fixed-budget compliant runs: 20 seeds × 3 penalties, d=16, k=4.
fn descent_runs() -> Vec<(u64, PenaltyKind, ProblemSpec, Trajectory)> {
    let jobs: Vec<(u64, PenaltyKind)> =
        (0..SEEDS).flat_map(|s| PenaltyKind::ALL.into_iter().map(move |k| (s, k))).collect();
    jobs.par_iter()
        .map(|&(seed, kind)| {
            let spec = instance(16, 4, seed);
            let cfg = compliant(&spec, seed, kind, DESCENT_ITERS, 0.0);
            let traj = run_rvsm(&cfg, &spec).unwrap();
            (seed, kind, spec, traj)
        })
        .collect()
}

fn criterion_4(runs: &[(u64, PenaltyKind, ProblemSpec, Trajectory)], elapsed: Duration) -> Outcome {
    let mut lag_bad = Vec::new();
    let mut ang_bad = Vec::new();
    let mut worst_ang = 0.0f64;
    let mut overshoot = 0;
    for (seed, kind, _, traj) in runs {
        let lag = check_monotone(traj, MonotoneField::Lagrangian);
        let ang = check_monotone(traj, MonotoneField::Angle);
        if !lag.ok {
            lag_bad.push(format!("{}/{seed}", kind.name()));
        }
        if !ang.ok {
            ang_bad.push(format!("{}/{seed}", kind.name()));
            worst_ang = worst_ang.max(ang.max_increase);
            // the angle dipped below its own limit and came back up
            let min = traj.records.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min);
            if min < traj.last().theta {
                overshoot += 1;
            }
        }
    }
    let slow = runtime_gate("descent", elapsed, 120.0);
    let pass = lag_bad.is_empty() && ang_bad.is_empty() && slow.is_none();
    outcome(
        pass,
        format!(
            "{} runs; Lagrangian violations {} {:?}; angle violations {} (max increase {:.2e}, {} end above their minimum) {:?}{}",
            runs.len(),
            lag_bad.len(),
            lag_bad,
            ang_bad.len(),
            worst_ang,
            overshoot,
            ang_bad,
            slow.unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Outcome {
    let jobs: Vec<(u64, PenaltyKind)> =
        (0..SEEDS).flat_map(|s| PenaltyKind::ALL.into_iter().map(move |k| (s, k))).collect();
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(seed, kind)| {
            let spec = instance(16, 4, seed);
            let cfg = compliant(&spec, seed, kind, LIMIT_ITERS, LIMIT_STOP_TOL);
            let delta = PI - angle(&cfg.init.resolve(16).unwrap(), spec.w_star()).unwrap();
            let traj = run_rvsm(&cfg, &spec).unwrap();
            let tag = format!("{}/{seed}", kind.name());
            let rep = match limit_residual(&traj, &spec, &cfg.penalty, cfg.beta) {
                Ok(r) => r,
                Err(e) => return Some(format!("{tag}: {e}")),
            };
            let grad_gate = 1e-8f64.max(LIMIT_STOP_TOL / cfg.eta);
            let mut bad = Vec::new();
            if !(rep.theta_bar < delta) {
                bad.push(format!("theta {:.3e} >= delta {:.3e}", rep.theta_bar, delta));
            }
            if !(rep.grad_norm_at_limit <= grad_gate) {
                bad.push(format!("grad {:.2e} > {:.2e}", rep.grad_norm_at_limit, grad_gate));
            }
            if !(rep.residual <= 1e-4 * spec.w_star_norm()) {
                bad.push(format!("residual {:.2e}", rep.residual));
            }
            if rep.expansion_signs_ok && rep.c_in_interval == Some(false) {
                bad.push(format!("C {:.4} outside (0, {:?})", rep.c_fit, rep.c_upper));
            }
            (!bad.is_empty()).then(|| format!("{tag}: {}", bad.join(", ")))
        })
        .collect();
    outcome(failures.is_empty(), format!("{} converged runs checked; failures {:?}", jobs.len(), failures))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let spec = instance(16, 4, 0);
    let base = compliant(&spec, 0, PenaltyKind::L1, LIMIT_ITERS, LIMIT_STOP_TOL);
    let w0 = base.init.resolve(16).unwrap();
    let beta_max = beta_bound(PI - angle(&w0, spec.w_star()).unwrap(), 4);
    let betas: Vec<f64> = (0..6).map(|i| beta_max * 64f64.powf((i as f64 - 5.0) / 5.0)).collect();
    let rep = match beta_error_scaling(&base, &spec, &betas) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("scaling run failed: {e}")),
    };
    let slow = runtime_gate("scaling", start.elapsed(), 120.0);
    let pts: Vec<String> = rep.points.iter().map(|p| format!("({:.3e}, {:.3e})", p.beta, p.error)).collect();
    let pass = rep.slope.is_some_and(|s| s >= 0.8) && slow.is_none();
    outcome(pass, format!("slope {:?} over (beta, error) {}{}", rep.slope, pts.join(" "), slow.unwrap_or_default()))
}

fn criterion_7(runs: &[(u64, PenaltyKind, ProblemSpec, Trajectory)]) -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (seed, kind, _, traj) in runs {
        let rate = grad_norm_rate(traj);
        for &(t, m) in &rate.prefixes {
            worst = worst.max(m * (t as f64).sqrt() / rate.c_fit);
        }
        if !rate.ok || rate.prefixes.len() != 3 {
            bad.push(format!("{}/{seed}", kind.name()));
        }
    }
    outcome(bad.is_empty(), format!("worst m(T)·√T / c = {worst:.3}; failing runs {bad:?}"))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    // δ ≈ π/2 for a random start in d=64, so β_bound ≈ 1/16 at k=8.
    let cfg = ExperimentConfig::from_json(
        r#"{
            "d": 64, "k": 8, "seed": 0, "max_iters": 5000, "stop_tol": 0.0,
            "optimizer": {"kind": "rvsm", "beta": 0.03},
            "penalty": {"kind": "l0", "lambda": 0.0},
            "analysis": {"limit": false, "annulus": false, "rate": false}
        }"#,
        &[],
    )
    .unwrap();
    let grid = Grid::from_json(&format!(
        r#"{{"seed": {:?}, "lambda_over_beta": [0.0125], "compare_admm": true}}"#,
        (0..SEEDS).collect::<Vec<_>>()
    ))
    .unwrap();
    let code = run_sweep(&cfg, &grid, dir.path(), None).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let first = &rows[0];
    let num = |name: &str| first[col(name)].parse::<f64>().unwrap_or(f64::NAN);
    let (nr, na) = (num("median_nnz_u"), num("median_nnz_u_admm"));
    let (lr, la) = (num("median_final_loss"), num("median_final_loss_admm"));
    let loss_ok = lr > 0.0 && la > 0.0 && lr.max(la) <= 2.0 * lr.min(la);
    let pass = code == 0 && rows.len() == SEEDS as usize && header.len() == SUMMARY_COLUMNS.len() && nr <= na && loss_ok;
    outcome(
        pass,
        format!("median nnz(u) rvsm {nr} vs admm {na}; median final loss rvsm {lr:.4e} vs admm {la:.4e}"),
    )
}

fn criterion_9() -> Outcome {
    let ks = [2usize, 4, 8, 16];
    let mut medians = Vec::new();
    for &k in &ks {
        let mut ms: Vec<f64> = (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let spec = instance(16, k, seed);
                let cfg = compliant(&spec, seed, PenaltyKind::L1, DESCENT_ITERS, LIMIT_STOP_TOL);
                let traj = run_rvsm(&cfg, &spec).unwrap();
                check_annulus(&traj, &spec).map(|r| r.m_measured).unwrap_or(f64::INFINITY)
            })
            .collect();
        ms.sort_by(f64::total_cmp);
        medians.push(0.5 * (ms[ms.len() / 2 - 1] + ms[ms.len() / 2]));
    }
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    let pass = inversions <= 1 && medians.iter().all(|m| m.is_finite());
    let pairs: Vec<String> = ks.iter().zip(&medians).map(|(k, m)| format!("k={k}: {m:.4e}")).collect();
    outcome(pass, format!("median M over {SEEDS} seeds: {}; inversions {inversions}", pairs.join(", ")))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"d": 16, "k": 4, "seed": 11, "max_iters": 2000,
            "optimizer": {"kind": "rvsm", "beta": 0.02},
            "penalty": {"kind": "tl1", "lambda": 0.002, "a": 1.0}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let codes = [cmd_run(&config, &[], Some(&a)), cmd_run(&config, &[], Some(&b))];
    let read = |p: &std::path::Path| fs::read(p.join("trajectory.csv")).unwrap_or_default();
    let (ta, tb) = (read(&a), read(&b));
    let pass = codes.iter().all(|&c| c == 0 || c == 2) && !ta.is_empty() && ta == tb;
    outcome(pass, format!("exit codes {codes:?}; {} bytes each; identical {}", ta.len(), ta == tb))
}

fn main() {
    let mut results: Vec<(usize, Outcome, Duration)> = Vec::new();
    let mut timed = |n: usize, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, o, start.elapsed()));
    };
    timed(1, &criterion_1);
    timed(2, &criterion_2);
    timed(3, &criterion_3);

    let start = Instant::now();
    let runs = descent_runs();
    let descent_time = start.elapsed();
    timed(4, &|| criterion_4(&runs, descent_time));
    timed(5, &criterion_5);
    timed(6, &criterion_6);
    timed(7, &|| criterion_7(&runs));
    timed(8, &criterion_8);
    timed(9, &criterion_9);
    timed(10, &criterion_10);

    let mut failed = 0;
    for (n, o, t) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {n} ({:.1}s): {}", t.as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

