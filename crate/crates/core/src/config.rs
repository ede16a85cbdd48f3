//! Experiment and model files.
//!
//! Loading is two-phase: serde parses the document (type errors carry their
//! key path through `serde_path_to_error`), then [`ExperimentConfig::resolve`]
//! checks domains, fills defaults and builds the certified model. The
//! resolved config serializes back to a document that resolves to itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::{Marginal, Model};
use crate::risk::{Estimator, EstimatorSpec};
use crate::rotation::{Point, Rotation};

/// Environment variable overriding the default seed.
pub const SEED_ENV: &str = "STRUCTKDE_SEED";

pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_REPS: usize = 200;
pub const DEFAULT_EPS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MarginalConfig {
    Gaussian {
        sigma: f64,
    },
    /// Gaussian plus a bump of width `eps`; `sigma` defaults to the smallest
    /// scale certified at `(β, L/2)`.
    Perturbed {
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

impl Default for MarginalConfig {
    fn default() -> Self {
        MarginalConfig::Perturbed {
            eps: DEFAULT_EPS,
            sigma: None,
        }
    }
}

/// `theta` is in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub marginal1: MarginalConfig,
    #[serde(default)]
    pub marginal2: MarginalConfig,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(rename = "L", default = "default_l")]
    pub l: f64,
}

fn default_theta() -> f64 {
    30.0
}
fn default_beta() -> f64 {
    2.0
}
fn default_l() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            marginal1: MarginalConfig::default(),
            marginal2: MarginalConfig::default(),
            theta: default_theta(),
            beta: default_beta(),
            l: default_l(),
        }
    }
}

/// `path.name`, or `name` at the document root.
fn key(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

impl MarginalConfig {
    fn validate(&self, path: &str) -> Result<()> {
        match *self {
            MarginalConfig::Gaussian { sigma } => positive(&key(path, "sigma"), sigma),
            MarginalConfig::Perturbed { eps, sigma } => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::config(key(path, "eps"), format!("must lie in (0, 1), got {eps}")));
                }
                if let Some(s) = sigma {
                    positive(&key(path, "sigma"), s)?;
                }
                Ok(())
            }
        }
    }

    fn build(&self, beta: f64, l: f64) -> Result<Marginal> {
        match *self {
            MarginalConfig::Gaussian { sigma } => Marginal::gaussian(sigma),
            MarginalConfig::Perturbed { eps, sigma: Some(s) } => Marginal::perturbed_with_sigma(beta, l, eps, s),
            MarginalConfig::Perturbed { eps, sigma: None } => Marginal::perturbed(beta, l, eps),
        }
    }

    /// Same marginal with any defaulted scale written out.
    fn resolved(&self, m: &Marginal) -> MarginalConfig {
        match *self {
            MarginalConfig::Perturbed { eps, .. } => MarginalConfig::Perturbed {
                eps,
                sigma: Some(m.sigma()),
            },
            ref g => g.clone(),
        }
    }
}

impl ModelConfig {
    /// Domain checks with key paths rooted at `path`.
    pub fn validate(&self, path: &str) -> Result<()> {
        positive(&key(path, "beta"), self.beta)?;
        positive(&key(path, "L"), self.l)?;
        finite(&key(path, "theta"), self.theta)?;
        self.marginal1.validate(&key(path, "marginal1"))?;
        self.marginal2.validate(&key(path, "marginal2"))
    }

    /// Validates, certifies and returns the model with the resolved config.
    pub fn build(&self, path: &str) -> Result<(Model, ModelConfig)> {
        self.validate(path)?;
        let m1 = self.marginal1.build(self.beta, self.l).map_err(|e| with_path(e, &key(path, "marginal1")))?;
        let m2 = self.marginal2.build(self.beta, self.l).map_err(|e| with_path(e, &key(path, "marginal2")))?;
        let resolved = ModelConfig {
            marginal1: self.marginal1.resolved(&m1),
            marginal2: self.marginal2.resolved(&m2),
            ..self.clone()
        };
        let model = Model::new(m1, m2, Rotation::from_degrees(self.theta)?, self.beta, self.l)?;
        Ok((model, resolved))
    }
}

/// Certification failures keep their class; other errors become config errors at `path`.
fn with_path(e: Error, path: &str) -> Error {
    match e {
        Error::Certification(msg) => Error::Certification(format!("{path}: {msg}")),
        Error::InvalidArgument { name, reason } => Error::config(key(path, name), reason),
        other => other,
    }
}

fn default_estimator() -> EstimatorSpec {
    EstimatorSpec::Oracle { mu: None }
}

fn default_p() -> f64 {
    DEFAULT_P
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

/// Seed from the environment, else 0.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

/// A `risk` experiment as written in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorSpec,
    /// Defaults to the smallest order whose vanishing moments cover `⌊β⌋`.
    #[serde(default)]
    pub kernel_order: Option<usize>,
    #[serde(default)]
    pub x: Point,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Model,
    pub kernel: Kernel,
}

impl Experiment {
    pub fn estimator(&self) -> Result<Estimator> {
        Estimator::new(
            self.config.estimator.clone(),
            self.kernel.clone(),
            self.model.clone(),
            self.config.p,
        )
    }
}

/// Order floor `m` with `2m >= ⌊β⌋`, at least 1.
pub fn default_kernel_order(beta: f64) -> usize {
    ((beta.floor() / 2.0).ceil() as usize).max(1)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })
    }

    /// Reads a JSON file, or the `# config=` header of a report CSV.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match text.lines().next().and_then(|l| l.strip_prefix(REPORT_HEADER)) {
            Some(json) => Self::from_json(json),
            None => Self::from_json(&text),
        }
    }

    pub fn resolve(&self) -> Result<Experiment> {
        let (model, model_cfg) = self.model.build("model")?;
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::config("p", format!("must be >= 1, got {}", self.p)));
        }
        if self.reps < 2 {
            return Err(Error::config("reps", format!("must be >= 2, got {}", self.reps)));
        }
        finite("x[0]", self.x[0])?;
        finite("x[1]", self.x[1])?;
        if self.n_grid.len() < 3 {
            return Err(Error::config("n_grid", format!("need >= 3 sample sizes, got {}", self.n_grid.len())));
        }
        if let Some(i) = self.n_grid.iter().position(|&n| n < 2) {
            return Err(Error::config(format!("n_grid[{i}]"), "sample sizes must be >= 2"));
        }
        validate_estimator(&self.estimator)?;
        let order = self.kernel_order.unwrap_or_else(|| default_kernel_order(self.model.beta));
        let config = ExperimentConfig {
            model: model_cfg,
            kernel_order: Some(order),
            ..self.clone()
        };
        let exp = Experiment {
            config,
            model,
            kernel: Kernel::new(order),
        };
        exp.estimator().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => Error::config(format!("estimator.params.{name}"), reason),
            other => other,
        })?;
        Ok(exp)
    }

    /// Compact JSON of the config.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }
}

fn validate_estimator(spec: &EstimatorSpec) -> Result<()> {
    let delta = |d: f64| {
        if d > 0.0 && d < 1.0 {
            Ok(())
        } else {
            Err(Error::config("estimator.params.delta", format!("must lie in (0, 1), got {d}")))
        }
    };
    match *spec {
        EstimatorSpec::Oracle { mu: Some(m) } if !(m >= 1.0) => {
            Err(Error::config("estimator.params.mu", format!("must be >= 1, got {m}")))
        }
        EstimatorSpec::Isotropic { h: Some(h) } => positive("estimator.params.h", h),
        EstimatorSpec::Adaptive { delta: d, a_mult, .. } => {
            delta(d)?;
            positive("estimator.params.a_mult", a_mult)
        }
        EstimatorSpec::Minimax {
            delta: d, b_mult, a_mult, ..
        } => {
            delta(d)?;
            positive("estimator.params.b_mult", b_mult)?;
            positive("estimator.params.a_mult", a_mult)
        }
        _ => Ok(()),
    }
}

/// First line of every report CSV, followed by the resolved config JSON.
pub const REPORT_HEADER: &str = "# config=";

/// Model file loader with key paths rooted at the document.
pub fn load_model(text: &str) -> Result<ModelConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ModelConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    Ok(cfg)
}
