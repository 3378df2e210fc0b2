//! Cartesian parameter sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{self, fmt_float};
use super::{execute, ExperimentConfig, OptimizerKind, EXIT_ERROR, EXIT_OK};
use crate::analysis::fit_slope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub lambda_over_beta: Vec<f64>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub seed: Vec<u64>,
    /// Also run ADMM on every cell with the same penalty, β, η and budget.
    #[serde(default)]
    pub compare_admm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LambdaSpec {
    Base,
    Absolute(f64),
    Ratio(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub index: usize,
    pub k: usize,
    pub seed: u64,
    pub beta: f64,
    lambda: LambdaSpec,
}

impl Grid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Grid = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("grid parse error: {e}")))?;
        if grid.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if !grid.lambda.is_empty() && !grid.lambda_over_beta.is_empty() {
            return Err(Error::InvalidConfig("grid sets both `lambda` and `lambda_over_beta`".into()));
        }
        Ok(grid)
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
            && self.lambda.is_empty()
            && self.lambda_over_beta.is_empty()
            && self.k.is_empty()
            && self.seed.is_empty()
    }

    /// Cells in grid order: k, then seed, then β, then λ.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<Cell> {
        fn or<T: Copy>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() { vec![d] } else { v.to_vec() }
        }
        let ks = or(&self.k, base.k);
        let seeds = or(&self.seed, base.seed);
        let betas = or(&self.beta, base.optimizer.beta);
        let lambdas: Vec<LambdaSpec> = if !self.lambda.is_empty() {
            self.lambda.iter().map(|&l| LambdaSpec::Absolute(l)).collect()
        } else if !self.lambda_over_beta.is_empty() {
            self.lambda_over_beta.iter().map(|&r| LambdaSpec::Ratio(r)).collect()
        } else {
            vec![LambdaSpec::Base]
        };
        let mut cells = Vec::new();
        for &k in &ks {
            for &seed in &seeds {
                for &beta in &betas {
                    for &lambda in &lambdas {
                        cells.push(Cell { index: cells.len(), k, seed, beta, lambda });
                    }
                }
            }
        }
        cells
    }
}

impl Cell {
    pub fn config(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.k = self.k;
        cfg.seed = self.seed;
        cfg.optimizer.beta = self.beta;
        match self.lambda {
            LambdaSpec::Base => {}
            LambdaSpec::Absolute(l) => cfg.penalty.lambda = l,
            LambdaSpec::Ratio(r) => cfg.penalty.lambda = r * self.beta,
        }
        cfg
    }

    fn lambda_key(&self) -> u64 {
        match self.lambda {
            LambdaSpec::Base => 0,
            LambdaSpec::Absolute(l) | LambdaSpec::Ratio(l) => l.to_bits(),
        }
    }
}

/// Outcome of one optimizer on one cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellRun {
    pub status: String,
    pub iterations: usize,
    pub final_loss: f64,
    pub theta_bar: f64,
    pub err_to_truth: f64,
    pub nnz_u: usize,
    pub lagrangian_monotone: bool,
    pub angle_monotone: bool,
}

impl CellRun {
    fn failed(e: &Error) -> Self {
        CellRun {
            status: format!("error: {e}"),
            iterations: 0,
            final_loss: f64::NAN,
            theta_bar: f64::NAN,
            err_to_truth: f64::NAN,
            nnz_u: 0,
            lagrangian_monotone: false,
            angle_monotone: false,
        }
    }

    pub fn ok(&self) -> bool {
        !self.status.starts_with("error")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: usize,
    pub k: usize,
    pub seed: u64,
    pub beta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub optimizer: OptimizerKind,
    pub penalty: &'static str,
    pub run: CellRun,
    pub admm: Option<CellRun>,
}

fn run_cell(cfg: &ExperimentConfig, dir: &Path, stem: &str) -> Result<CellRun> {
    let out = execute(cfg)?;
    let traj = &out.trajectory;
    let last = traj.last();
    std::fs::write(dir.join(format!("{stem}.csv")), output::trajectory_csv(traj)?)
        .map_err(|e| Error::InvalidConfig(format!("cannot write cell output: {e}")))?;
    Ok(CellRun {
        status: serde_json::to_value(traj.termination)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        iterations: traj.iterations(),
        final_loss: last.loss,
        theta_bar: last.theta,
        err_to_truth: last.w.distance(out.spec.w_star()),
        nnz_u: last.nnz_u,
        lagrangian_monotone: out.analysis.lagrangian_monotone.ok,
        angle_monotone: out.analysis.angle_monotone.ok,
    })
}

fn evaluate(cell: &Cell, base: &ExperimentConfig, grid: &Grid, dir: &Path) -> CellResult {
    let cfg = cell.config(base);
    let eta = cfg.validate().and_then(|_| cfg.problem()).and_then(|spec| cfg.eta(&spec)).unwrap_or(f64::NAN);
    let stem = format!("cell_{:04}", cell.index);
    let run = run_cell(&cfg, dir, &stem).unwrap_or_else(|e| CellRun::failed(&e));
    let admm = grid.compare_admm.then(|| {
        let mut admm_cfg = cfg.clone();
        admm_cfg.optimizer.kind = OptimizerKind::Admm;
        run_cell(&admm_cfg, dir, &format!("{stem}_admm")).unwrap_or_else(|e| CellRun::failed(&e))
    });
    let result = CellResult {
        cell: cell.index,
        k: cell.k,
        seed: cell.seed,
        beta: cell.beta,
        lambda: cfg.penalty.lambda,
        eta,
        optimizer: cfg.optimizer.kind,
        penalty: cfg.penalty.kind.name(),
        run,
        admm,
    };
    if let Ok(json) = output::to_json(&result) {
        let _ = std::fs::write(dir.join(format!("{stem}.json")), json);
    }
    result
}

pub const SUMMARY_COLUMNS: [&str; 23] = [
    "cell",
    "k",
    "seed",
    "beta",
    "lambda",
    "eta",
    "optimizer",
    "penalty",
    "status",
    "iterations",
    "final_loss",
    "theta_bar",
    "err_to_truth",
    "nnz_u",
    "lagrangian_monotone",
    "angle_monotone",
    "nnz_u_admm",
    "final_loss_admm",
    "median_nnz_u",
    "median_nnz_u_admm",
    "median_final_loss",
    "median_final_loss_admm",
    "beta_slope",
];

pub fn median(values: &mut [f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Default, Clone, Copy)]
struct Medians {
    nnz: Option<f64>,
    nnz_admm: Option<f64>,
    loss: Option<f64>,
    loss_admm: Option<f64>,
}

/// Medians across seeds, keyed by (k, β, λ).
fn seed_medians(cells: &[Cell], results: &[CellResult]) -> BTreeMap<(usize, u64, u64), Medians> {
    let mut groups: BTreeMap<(usize, u64, u64), Vec<usize>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.k, c.beta.to_bits(), c.lambda_key())).or_default().push(c.index);
    }
    groups
        .into_iter()
        .map(|(key, idx)| {
            let pick = |f: &dyn Fn(&CellResult) -> Option<f64>| {
                let mut v: Vec<f64> = idx.iter().filter_map(|&i| f(&results[i])).collect();
                median(&mut v)
            };
            let ok = |r: &CellRun| r.ok();
            let m = Medians {
                nnz: pick(&|r| ok(&r.run).then_some(r.run.nnz_u as f64)),
                nnz_admm: pick(&|r| r.admm.as_ref().filter(|a| ok(a)).map(|a| a.nnz_u as f64)),
                loss: pick(&|r| ok(&r.run).then_some(r.run.final_loss)),
                loss_admm: pick(&|r| r.admm.as_ref().filter(|a| ok(a)).map(|a| a.final_loss)),
            };
            (key, m)
        })
        .collect()
}

/// Log-log slope of error against β, keyed by (k, seed, λ spec).
fn beta_slopes(cells: &[Cell], results: &[CellResult]) -> BTreeMap<(usize, u64, u64), Option<f64>> {
    let mut groups: BTreeMap<(usize, u64, u64), Vec<usize>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.k, c.seed, c.lambda_key())).or_default().push(c.index);
    }
    groups
        .into_iter()
        .map(|(key, idx)| {
            let (x, y): (Vec<f64>, Vec<f64>) = idx
                .iter()
                .map(|&i| &results[i])
                .filter(|r| r.run.ok() && r.run.err_to_truth > 0.0 && r.beta > 0.0)
                .map(|r| (r.beta.ln(), r.run.err_to_truth.ln()))
                .unzip();
            (key, fit_slope(&x, &y).ok())
        })
        .collect()
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn summary_csv(cells: &[Cell], results: &[CellResult], beta_swept: bool) -> Result<String> {
    let err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    let medians = seed_medians(cells, results);
    let slopes = beta_slopes(cells, results);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS).map_err(err)?;
    for (c, r) in cells.iter().zip(results) {
        let m = medians[&(c.k, c.beta.to_bits(), c.lambda_key())];
        let slope = if beta_swept { slopes[&(c.k, c.seed, c.lambda_key())] } else { None };
        let optimizer = serde_json::to_value(r.optimizer).ok().and_then(|v| v.as_str().map(str::to_owned));
        w.write_record([
            r.cell.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            fmt_float(r.beta),
            fmt_float(r.lambda),
            fmt_float(r.eta),
            optimizer.unwrap_or_default(),
            r.penalty.to_string(),
            r.run.status.clone(),
            r.run.iterations.to_string(),
            fmt_float(r.run.final_loss),
            fmt_float(r.run.theta_bar),
            fmt_float(r.run.err_to_truth),
            r.run.nnz_u.to_string(),
            r.run.lagrangian_monotone.to_string(),
            r.run.angle_monotone.to_string(),
            r.admm.as_ref().map(|a| a.nnz_u.to_string()).unwrap_or_default(),
            opt_float(r.admm.as_ref().map(|a| a.final_loss)),
            opt_float(m.nnz),
            opt_float(m.nnz_admm),
            opt_float(m.loss),
            opt_float(m.loss_admm),
            opt_float(slope),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

/// Runs every cell and writes `cells/` plus `summary.csv` under `dir`.
/// Exit code is 1 if any cell failed outright.
pub fn run_sweep(base: &ExperimentConfig, grid: &Grid, dir: &Path, workers: Option<usize>) -> Result<i32> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid is empty".into()));
    }
    let cells = grid.cells(base);
    let cell_dir = dir.join("cells");
    std::fs::create_dir_all(&cell_dir)
        .map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", cell_dir.display())))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<CellResult> =
        pool.install(|| cells.par_iter().map(|c| evaluate(c, base, grid, &cell_dir)).collect());

    let beta_swept = grid.beta.len() >= 2;
    let summary = summary_csv(&cells, &results, beta_swept)?;
    output::write_all(dir, &[("summary.csv", summary)])
        .map_err(|e| Error::InvalidConfig(format!("cannot write summary: {e}")))?;

    let failed = results.iter().filter(|r| !r.run.ok() || r.admm.as_ref().is_some_and(|a| !a.ok())).count();
    println!("{} cells, {} failed; summary at {}", results.len(), failed, dir.join("summary.csv").display());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ERROR })
}
