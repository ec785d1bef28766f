//! JSON problem configuration with `key.path=value` overrides.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{DuffingModel, LinearModel, PendulumModel, SystemModel, VanDerPolModel};
use crate::error::{Error, Result};
use crate::lsolve::DirectionNorm;
use crate::newton::{SolverConfig, StepPolicy};
use crate::shooting::ShootingProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub system: SystemConfig,
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub target: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub refine: RefineSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Pendulum {
        alpha: f64,
        beta: f64,
        h_step: f64,
    },
    Linear {
        /// Row-major.
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    ControlAffine(BuiltinAffine),
}

/// Named control-affine models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinAffine {
    VanDerPol { mu: f64, h_step: f64 },
    Duffing { delta: f64, alpha: f64, beta: f64, h_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pure,
    FixedMuL,
    FixedL,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_norm")]
    pub direction_norm: DirectionNorm,
    #[serde(default)]
    pub beta0: Option<f64>,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_max_backtracks")]
    pub max_backtracks: usize,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default, rename = "L_const")]
    pub l_const: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_probe_steps")]
    pub probe_steps: usize,
    #[serde(default = "default_eps")]
    pub refine_eps: f64,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Adaptive
}
fn default_norm() -> DirectionNorm {
    DirectionNorm::L1
}
fn default_shrink() -> f64 {
    0.5
}
fn default_eps() -> f64 {
    1e-9
}
fn default_max_iterations() -> usize {
    100
}
fn default_max_backtracks() -> usize {
    60
}
fn default_probe_steps() -> usize {
    1
}

impl Default for SolverSection {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields defaulted")
    }
}

impl Default for RefineSection {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields defaulted")
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config_err(format!("{name} must be a non-empty rectangular array of rows")));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

/// Sets `path` (dot separated) in `doc` to `raw`, parsed as JSON when
/// possible and as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(config_err(format!("override path `{path}` has an empty segment")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_err(format!("override path `{path}` crosses a non-object")))?;
        if keys.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl ProblemConfig {
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ProblemConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        let m = model.state_dim();
        if self.x0.len() != m || self.target.len() != m {
            return Err(config_err(format!(
                "x0 and target must have length {m}, got {} and {}",
                self.x0.len(),
                self.target.len()
            )));
        }
        if self.horizon == 0 {
            return Err(config_err("horizon must be at least 1"));
        }
        if self.refine.probe_steps == 0 {
            return Err(config_err("refine.probe_steps must be at least 1"));
        }
        if !(self.refine.refine_eps > 0.0) {
            return Err(config_err("refine.refine_eps must be positive"));
        }
        self.solver_config()?.validate().map_err(|e| config_err(e.to_string()))
    }

    pub fn model(&self) -> Result<Arc<dyn SystemModel>> {
        let model: Arc<dyn SystemModel> = match &self.system {
            SystemConfig::Pendulum { alpha, beta, h_step } => {
                Arc::new(PendulumModel::new(*alpha, *beta, *h_step)?)
            }
            SystemConfig::Linear { a, b } => {
                let a = matrix_from_rows("A", a)?;
                let b = matrix_from_rows("B", b)?;
                Arc::new(LinearModel::new(a, b).map_err(|e| config_err(e.to_string()))?)
            }
            SystemConfig::ControlAffine(BuiltinAffine::VanDerPol { mu, h_step }) => {
                Arc::new(VanDerPolModel::new(*mu, *h_step)?)
            }
            SystemConfig::ControlAffine(BuiltinAffine::Duffing { delta, alpha, beta, h_step }) => {
                Arc::new(DuffingModel::new(*delta, *alpha, *beta, *h_step)?)
            }
        };
        Ok(model)
    }

    pub fn problem(&self) -> Result<ShootingProblem> {
        ShootingProblem::new(
            self.model()?,
            DVector::from_column_slice(&self.x0),
            DVector::from_column_slice(&self.target),
            self.horizon,
        )
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| config_err(format!("solver.{name} is required for {:?}", s.algorithm)))
        };
        let policy = match s.algorithm {
            Algorithm::Pure => StepPolicy::Pure,
            Algorithm::FixedMuL => {
                StepPolicy::FixedMuL { mu: need(s.mu, "mu")?, l_const: need(s.l_const, "L_const")? }
            }
            Algorithm::FixedL => StepPolicy::FixedL { l_const: need(s.l_const, "L_const")? },
            Algorithm::Adaptive => StepPolicy::Adaptive { beta0: s.beta0, shrink: s.shrink },
        };
        Ok(SolverConfig {
            policy,
            direction_norm: s.direction_norm,
            eps: s.eps,
            max_iterations: s.max_iterations,
            max_backtracks: s.max_backtracks,
            u0: None,
        })
    }
}
