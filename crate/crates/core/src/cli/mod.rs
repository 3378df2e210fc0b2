//! Command implementations behind the `rvsm` binary. Each returns the
//! process exit code: 0 success, 2 run did not converge, 1 error.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    check_annulus, check_monotone, check_preconditions, grad_norm_rate, limit_residual, AnnulusReport,
    LimitReport, MonotoneField, MonotoneReport, PreconditionReport, RateReport,
};
use crate::certify::{self, CertifyPlan};
use crate::error::{Error, Result};
use crate::optim::{run_admm, run_gd, run_rvsm, Trajectory};
use crate::population::{estimate_lipschitz, LipschitzEstimate, ProblemSpec};
use crate::rng::Rng;

pub use config::{ExperimentConfig, OptimizerKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Env var holding the sweep worker count.
pub const WORKERS_ENV: &str = "RVSM_WORKERS";

/// Result of one configured experiment, before anything touches disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub spec: ProblemSpec,
    pub trajectory: Trajectory,
    pub preconditions: PreconditionReport,
    pub limit: Option<std::result::Result<LimitReport, Error>>,
    pub analysis: AnalysisReport,
    pub lipschitz: Option<LipschitzEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub lagrangian_monotone: MonotoneReport,
    pub angle_monotone: MonotoneReport,
    pub annulus: Option<std::result::Result<AnnulusReport, String>>,
    pub rate: Option<RateReport>,
}

impl RunOutcome {
    pub fn not_converged(&self) -> bool {
        matches!(self.limit, Some(Err(Error::NotConverged { .. })))
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let spec = cfg.problem()?;
    let lipschitz = cfg.lipschitz(&spec)?;
    let rvsm_cfg = cfg.rvsm(&spec)?;
    let w0 = rvsm_cfg.init.resolve(spec.dim())?;
    let trajectory = match cfg.optimizer.kind {
        OptimizerKind::Rvsm => run_rvsm(&rvsm_cfg, &spec)?,
        OptimizerKind::Admm => run_admm(&cfg.admm(&spec)?, &spec)?,
        OptimizerKind::Gd => run_gd(rvsm_cfg.eta, &w0, &spec, cfg.max_iters, cfg.stop_tol)?,
    };
    let preconditions = check_preconditions(&rvsm_cfg, &spec, &w0, lipschitz)?;
    let limit = cfg
        .analysis
        .limit
        .then(|| limit_residual(&trajectory, &spec, &trajectory.penalty, trajectory.beta));
    if let Some(Err(e)) = &limit {
        if !matches!(e, Error::NotConverged { .. }) {
            return Err(e.clone());
        }
    }
    let analysis = AnalysisReport {
        lagrangian_monotone: check_monotone(&trajectory, MonotoneField::Lagrangian),
        angle_monotone: check_monotone(&trajectory, MonotoneField::Angle),
        annulus: cfg.analysis.annulus.then(|| check_annulus(&trajectory, &spec).map_err(|e| e.to_string())),
        rate: cfg.analysis.rate.then(|| grad_norm_rate(&trajectory)),
    };
    let lipschitz_est = if cfg.analysis.lipschitz_samples > 0 {
        let mut rng = Rng::with_stream(cfg.seed, 2);
        Some(estimate_lipschitz(&spec, cfg.lipschitz_radius, cfg.analysis.lipschitz_samples, &mut rng)?)
    } else {
        None
    };
    Ok(RunOutcome { spec, trajectory, preconditions, limit, analysis, lipschitz: lipschitz_est })
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum LimitFile<'a> {
    Converged(&'a LimitReport),
    NotConverged { final_step_norm: f64, stop_tol: f64 },
}

#[derive(Serialize)]
struct Metadata<'a> {
    timestamp_unix: u64,
    config: &'a ExperimentConfig,
    w_star: &'a [f64],
    termination: crate::optim::Termination,
    iterations: usize,
    lipschitz_bound: f64,
    lipschitz_estimate: Option<LipschitzEstimate>,
    /// The descent guarantee asks for η ≤ 1/(β+L); one w-step already descends
    /// for η ≤ 2/(β+L). Both verdicts are kept.
    eta_within_guarantee_bound: bool,
    eta_within_descent_bound: bool,
    precondition_failures: Vec<&'static str>,
}

/// Serialized files for one run: `(file name, contents)`.
pub fn render_outcome(cfg: &ExperimentConfig, out: &RunOutcome) -> Result<Vec<(&'static str, String)>> {
    let mut files = vec![
        ("trajectory.csv", output::trajectory_csv(&out.trajectory)?),
        ("precondition_report.json", output::to_json(&out.preconditions)?),
        ("analysis_report.json", output::to_json(&out.analysis)?),
    ];
    if let Some(limit) = &out.limit {
        let body = match limit {
            Ok(rep) => LimitFile::Converged(rep),
            Err(Error::NotConverged { step_norm, stop_tol }) => {
                LimitFile::NotConverged { final_step_norm: *step_norm, stop_tol: *stop_tol }
            }
            Err(e) => return Err(e.clone()),
        };
        files.push(("limit_report.json", output::to_json(&body)?));
    }
    let meta = Metadata {
        timestamp_unix: output::unix_timestamp(),
        config: cfg,
        w_star: out.spec.w_star().as_slice(),
        termination: out.trajectory.termination,
        iterations: out.trajectory.iterations(),
        lipschitz_bound: out.preconditions.l_used,
        lipschitz_estimate: out.lipschitz,
        eta_within_guarantee_bound: out.preconditions.eta_ok,
        eta_within_descent_bound: out.preconditions.eta_descent_ok,
        precondition_failures: out.preconditions.failures(),
    };
    files.push(("metadata.json", output::to_json(&meta)?));
    Ok(files)
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text, overrides)
}

/// `run --config <path> [--set key=value ...]`
pub fn cmd_run(config: &Path, overrides: &[String], output_dir: Option<&Path>) -> i32 {
    match run_inner(config, overrides, output_dir) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run_inner(config: &Path, overrides: &[String], output_dir: Option<&Path>) -> Result<i32> {
    let cfg = load_config(config, overrides)?;
    let out = execute(&cfg)?;
    for failure in out.preconditions.failures() {
        eprintln!("warning: precondition `{failure}` does not hold; running anyway");
    }
    let files = render_outcome(&cfg, &out)?;
    let dir: PathBuf = output_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    output::write_all(&dir, &files)
        .map_err(|e| Error::InvalidConfig(format!("cannot write to {}: {e}", dir.display())))?;
    let last = out.trajectory.last();
    println!(
        "{} iterations ({:?}); f = {:.6e}, theta = {:.6e}, nnz(u) = {}",
        out.trajectory.iterations(),
        out.trajectory.termination,
        last.loss,
        last.theta,
        last.nnz_u
    );
    Ok(if out.not_converged() { EXIT_NOT_CONVERGED } else { EXIT_OK })
}

/// `sweep --config <path> --grid <path>`
pub fn cmd_sweep(config: &Path, grid: &Path, output_dir: Option<&Path>) -> i32 {
    let run = || -> Result<i32> {
        let base = load_config(config, &[])?;
        let text = std::fs::read_to_string(grid)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", grid.display())))?;
        let grid = sweep::Grid::from_json(&text)?;
        let dir: PathBuf = output_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&base.output_dir));
        sweep::run_sweep(&base, &grid, &dir, workers_from_env())
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

/// `certify [--quick]`
pub fn cmd_certify(quick: bool) -> i32 {
    let plan = if quick { CertifyPlan::quick() } else { CertifyPlan::full() };
    let results = certify::run_all(&plan, &certify::reference_prox);
    print!("{}", certify::format_table(&results));
    if results.iter().all(certify::SuiteResult::passed) {
        EXIT_OK
    } else {
        EXIT_ERROR
    }
}
