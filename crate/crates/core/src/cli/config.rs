//! Experiment configuration: JSON with flat top-level keys plus nested
//! `optimizer` and `penalty` blocks. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::optim::{auto_step_size, AdmmConfig, Init, RvsmConfig, USource, WUpdate};
use crate::penalty::Penalty;
use crate::population::{lipschitz_bound, ProblemSpec};
use crate::rng::{sample_unit_sphere, Rng};
use crate::vector::RealVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Rvsm,
    Admm,
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Step size; `null` selects `1/(β + L)`.
    #[serde(default)]
    pub eta: Option<f64>,
    pub beta: f64,
    #[serde(default)]
    pub u_update_source: USource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisToggles {
    #[serde(default = "yes")]
    pub limit: bool,
    #[serde(default = "yes")]
    pub annulus: bool,
    #[serde(default = "yes")]
    pub rate: bool,
    /// Random coplanar pairs for the measured Lipschitz ratio (0 disables).
    #[serde(default)]
    pub lipschitz_samples: usize,
}

fn yes() -> bool {
    true
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self { limit: true, annulus: true, rate: true, lipschitz_samples: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    /// Global seed; default for every other seed.
    #[serde(default)]
    pub seed: u64,
    /// Explicit ground truth; otherwise drawn from the unit sphere.
    #[serde(default)]
    pub w_star: Option<RealVector>,
    #[serde(default)]
    pub w_star_seed: Option<u64>,
    /// Explicit initialization; otherwise a random sphere point.
    #[serde(default)]
    pub init_w: Option<RealVector>,
    #[serde(default)]
    pub init_seed: Option<u64>,
    #[serde(default = "one")]
    pub init_scale: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    /// Norm floor `M` in the Lipschitz bound `L = 1 + 3‖w*‖/M`.
    #[serde(default = "default_radius")]
    pub lipschitz_radius: f64,
    pub optimizer: OptimizerConfig,
    pub penalty: Penalty,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn one() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    10_000
}
fn default_stop_tol() -> f64 {
    1e-12
}
fn default_radius() -> f64 {
    0.5
}
fn default_output_dir() -> String {
    "out".into()
}

/// Ground-truth draws use stream 1 of their seed, initializations stream 0,
/// so equal seeds never make `w⁰` parallel to `w*`.
const W_STAR_STREAM: u64 = 1;

impl ExperimentConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("d and k must be at least 1".into()));
        }
        if let Some(w) = &self.w_star {
            w.ensure_len(self.d)?;
        }
        if let Some(w) = &self.init_w {
            w.ensure_len(self.d)?;
        }
        if !(self.optimizer.beta > 0.0) {
            return Err(Error::InvalidBeta(self.optimizer.beta));
        }
        if let Some(eta) = self.optimizer.eta {
            if !(eta > 0.0) {
                return Err(Error::InvalidConfig(format!("eta must be > 0, got {eta}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be >= 0".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init_scale must be > 0".into()));
        }
        self.penalty.validate()?;
        let spec = self.problem()?;
        lipschitz_bound(self.lipschitz_radius, &spec)?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let w_star = match &self.w_star {
            Some(w) => w.clone(),
            None => {
                let seed = self.w_star_seed.unwrap_or(self.seed);
                sample_unit_sphere(self.d, &mut Rng::with_stream(seed, W_STAR_STREAM))
            }
        };
        ProblemSpec::new(w_star, self.k)
    }

    pub fn init(&self) -> Init {
        match &self.init_w {
            Some(w) => Init::Explicit(w.clone()),
            None => Init::RandomSphere { seed: self.init_seed.unwrap_or(self.seed), scale: self.init_scale },
        }
    }

    pub fn lipschitz(&self, spec: &ProblemSpec) -> Result<f64> {
        lipschitz_bound(self.lipschitz_radius, spec)
    }

    pub fn eta(&self, spec: &ProblemSpec) -> Result<f64> {
        match self.optimizer.eta {
            Some(eta) => Ok(eta),
            None => Ok(auto_step_size(self.optimizer.beta, self.lipschitz(spec)?)),
        }
    }

    pub fn rvsm(&self, spec: &ProblemSpec) -> Result<RvsmConfig> {
        Ok(RvsmConfig {
            eta: self.eta(spec)?,
            beta: self.optimizer.beta,
            penalty: self.penalty,
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            init: self.init(),
            u_source: self.optimizer.u_update_source,
        })
    }

    pub fn admm(&self, spec: &ProblemSpec) -> Result<AdmmConfig> {
        Ok(AdmmConfig {
            eta: self.eta(spec)?,
            beta: self.optimizer.beta,
            penalty: self.penalty,
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            init: self.init(),
            w_update: WUpdate::GradientStep,
        })
    }
}

/// Applies `path.to.key=value`. The value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override path `{path}` crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::InvalidConfig(format!("empty override path in `{assignment}`")))
}
