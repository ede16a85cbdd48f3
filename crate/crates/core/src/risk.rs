//! Monte Carlo pointwise risks.
//!
//! Replication `r` at sample size `n` draws from ChaCha stream `r` keyed by
//! `mix(seed, n)`. Replications run in parallel, but their errors are stored
//! by index and reduced in index order, so every report is bit-identical
//! across thread counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{product_unchecked, UStatMode};
use crate::kernel::Kernel;
use crate::model::{Model, Sample};
use crate::rng;
use crate::rotation::{Point, Rotation, RotationNet};
use crate::selector::{calibrate_a_mult, minimax_select, AdaptiveRule, MinimaxOptions};

/// Angle tolerance for matching a selected rotation to the truth.
pub const SELECTION_TOL: f64 = 1e-9;

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    Ok(())
}

/// Oracle bandwidth `(μ/n)^{1/(2β+1)}`.
pub fn oracle_bandwidth(mu: f64, n: usize, beta: f64) -> Result<f64> {
    if !(mu >= 1.0 && mu <= n as f64) {
        return Err(Error::invalid("mu", format!("must lie in [1, n = {n}], got {mu}")));
    }
    Ok((mu / n as f64).powf(1.0 / (2.0 * beta + 1.0)))
}

/// Product estimator along the true rotation at the oracle bandwidth.
pub fn oracle_estimate(kernel: &Kernel, sample: &Sample, x: Point, model: &Model, mu: f64, beta: f64) -> Result<f64> {
    let h = oracle_bandwidth(mu, sample.len(), beta)?;
    Ok(product_unchecked(kernel, &sample.points, x, h, model.rotation()))
}

/// Default isotropic bandwidth `n^{-1/(2β+2)}`.
pub fn isotropic_bandwidth(n: usize, beta: f64) -> f64 {
    (n as f64).powf(-1.0 / (2.0 * beta + 2.0))
}

/// `n⁻¹ Σ K_h(X_k1 - x1) K_h(X_k2 - x2)` in the original coordinates.
pub fn isotropic_baseline(kernel: &Kernel, sample: &Sample, x: Point, h: f64) -> Result<f64> {
    check_h(h)?;
    let s: f64 = sample
        .points
        .iter()
        .map(|p| {
            let a = kernel.eval((p[0] - x[0]) / h);
            if a == 0.0 {
                0.0
            } else {
                a * kernel.eval((p[1] - x[1]) / h)
            }
        })
        .sum();
    Ok(s / (h * h * sample.len() as f64))
}

/// Estimator choice as it appears in experiment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Known rotation, bandwidth `(μ/n)^{1/(2β+1)}`; `μ` defaults to `ln n`.
    Oracle {
        #[serde(default)]
        mu: Option<f64>,
    },
    /// Unrotated product kernel; `h` defaults to `n^{-1/(2β+2)}`.
    Isotropic {
        #[serde(default)]
        h: Option<f64>,
    },
    Adaptive {
        delta: f64,
        #[serde(default = "one")]
        a_mult: f64,
        #[serde(default)]
        mode: ModeSpec,
    },
    Minimax {
        delta: f64,
        #[serde(default = "one")]
        b_mult: f64,
        #[serde(default = "one")]
        a_mult: f64,
        #[serde(default)]
        no_split: bool,
        #[serde(default)]
        mode: ModeSpec,
    },
    /// Returns the true density; its risk is zero.
    Exact,
}

fn one() -> f64 {
    1.0
}

/// Serializable mirror of [`UStatMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Naive,
    #[default]
    Pruned,
}

impl From<ModeSpec> for UStatMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Naive => UStatMode::Naive,
            ModeSpec::Pruned => UStatMode::Pruned,
        }
    }
}

impl EstimatorSpec {
    /// Short tag used in reports.
    pub fn id(&self) -> String {
        match self {
            EstimatorSpec::Oracle { mu: None } => "oracle(mu=ln n)".into(),
            EstimatorSpec::Oracle { mu: Some(m) } => format!("oracle(mu={m})"),
            EstimatorSpec::Isotropic { h: None } => "isotropic(h=n^-1/(2b+2))".into(),
            EstimatorSpec::Isotropic { h: Some(h) } => format!("isotropic(h={h})"),
            EstimatorSpec::Adaptive { delta, a_mult, .. } => format!("adaptive(delta={delta};a_mult={a_mult})"),
            EstimatorSpec::Minimax {
                delta,
                b_mult,
                no_split,
                ..
            } => format!("minimax(delta={delta};b_mult={b_mult};no_split={no_split})"),
            EstimatorSpec::Exact => "exact".into(),
        }
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Oracle(Option<f64>),
    Isotropic(Option<f64>),
    Adaptive(Box<AdaptiveRule>),
    Minimax {
        net: RotationNet,
        opts: MinimaxOptions,
    },
    Exact,
}

/// An estimator with its kernel and selection constants resolved for a model.
#[derive(Debug, Clone)]
pub struct Estimator {
    spec: EstimatorSpec,
    kernel: Kernel,
    model: Model,
    p: f64,
    prepared: Prepared,
}

impl Estimator {
    pub fn new(spec: EstimatorSpec, kernel: Kernel, model: Model, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid("p", format!("must be >= 1, got {p}")));
        }
        let prepared = match &spec {
            EstimatorSpec::Oracle { mu } => {
                if let Some(m) = mu {
                    if !(*m >= 1.0) {
                        return Err(Error::invalid("mu", format!("must be >= 1, got {m}")));
                    }
                }
                Prepared::Oracle(*mu)
            }
            EstimatorSpec::Isotropic { h } => {
                if let Some(h) = h {
                    check_h(*h)?;
                }
                Prepared::Isotropic(*h)
            }
            EstimatorSpec::Adaptive { delta, a_mult, mode } => {
                let net = RotationNet::build(*delta)?;
                let mb = kernel.order_floor().max(1) as f64;
                let rule = AdaptiveRule::new(kernel.clone(), net, p, *a_mult, mb)?.with_mode((*mode).into());
                Prepared::Adaptive(Box::new(rule))
            }
            EstimatorSpec::Minimax {
                delta,
                b_mult,
                a_mult,
                no_split,
                mode,
            } => Prepared::Minimax {
                net: RotationNet::build(*delta)?,
                opts: MinimaxOptions {
                    b_mult: *b_mult,
                    a_mult: *a_mult,
                    p,
                    no_split: *no_split,
                    mode: (*mode).into(),
                },
            },
            EstimatorSpec::Exact => Prepared::Exact,
        };
        Ok(Estimator {
            spec,
            kernel,
            model,
            p,
            prepared,
        })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn id(&self) -> String {
        self.spec.id()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn evaluate(&self, sample: &Sample, x: Point) -> Result<f64> {
        let n = sample.len();
        let beta = self.model.beta();
        match &self.prepared {
            Prepared::Oracle(mu) => {
                let mu = mu.unwrap_or_else(|| (n as f64).ln());
                oracle_estimate(&self.kernel, sample, x, &self.model, mu, beta)
            }
            Prepared::Isotropic(h) => {
                let h = h.unwrap_or_else(|| isotropic_bandwidth(n, beta));
                isotropic_baseline(&self.kernel, sample, x, h)
            }
            Prepared::Adaptive(rule) => Ok(rule.select(sample, x)?.estimate),
            Prepared::Minimax { net, opts } => {
                Ok(minimax_select(sample, x, net, &self.kernel, beta, self.model.l(), *opts)?.estimate)
            }
            Prepared::Exact => Ok(self.model.density(x)),
        }
    }
}

/// Risk estimate at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskPoint {
    pub n: usize,
    pub risk: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Runs `f(r, rng)` for every replication and collects results by index.
fn replicate<T, F>(reps: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            f(r, &mut g).map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}

/// `(mean |f̃ - f(x)|^p)^{1/p}` with a delta-method standard error.
pub fn pointwise_risk(est: &Estimator, x: Point, n: usize, reps: usize, seed: u64) -> Result<RiskPoint> {
    if reps < 2 {
        return Err(Error::invalid("reps", format!("must be >= 2, got {reps}")));
    }
    let model = est.model();
    let truth = model.density(x);
    let p = est.p();
    let errs = replicate(reps, seed, |_, g| {
        let s = model.sample_with(n, g, seed)?;
        Ok((est.evaluate(&s, x)? - truth).abs().powf(p))
    })?;
    let r = reps as f64;
    let mean = errs.iter().sum::<f64>() / r;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let se_mean = (var / r).sqrt();
    let risk = mean.powf(1.0 / p);
    let stderr = if mean > 0.0 {
        risk / (p * mean) * se_mean
    } else {
        0.0
    };
    Ok(RiskPoint { n, risk, stderr, reps })
}

/// Risks over an `n` grid and the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub points: Vec<RiskPoint>,
    /// `None` when some risk is zero (degenerate report).
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub estimator_id: String,
}

impl RiskReport {
    pub fn is_degenerate(&self) -> bool {
        self.slope.is_none()
    }

    pub fn n_grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn risk_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.risk)
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, se(b))`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let k = xs.len();
    if k < 3 || ys.len() != k {
        return Err(Error::invalid("n_grid", format!("slope needs >= 3 points, got {k}")));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("n_grid", "sample sizes must not all coincide"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Ok((b, (ssr / (kf - 2.0) / sxx).sqrt()))
}

pub fn rate_study(est: &Estimator, x: Point, n_grid: &[usize], reps: usize, seed: u64) -> Result<RiskReport> {
    if n_grid.len() < 3 {
        return Err(Error::invalid("n_grid", format!("need >= 3 sample sizes, got {}", n_grid.len())));
    }
    let points = n_grid
        .iter()
        .map(|&n| pointwise_risk(est, x, n, reps, rng::mix(seed, n as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (slope, slope_stderr) = if points.iter().all(|p| p.risk > 0.0) {
        let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.risk.ln()).collect();
        let (b, se) = ols_slope(&xs, &ys)?;
        (Some(b), Some(se))
    } else {
        (None, None)
    };
    Ok(RiskReport {
        points,
        slope,
        slope_stderr,
        reps,
        seed,
        estimator_id: est.id(),
    })
}

/// `risk / (ln n / n)^{β/(2β+1)}` per grid point.
pub fn rate_constants(report: &RiskReport, beta: f64) -> Vec<f64> {
    report
        .points
        .iter()
        .map(|p| {
            let n = p.n as f64;
            p.risk / (n.ln() / n).powf(beta / (2.0 * beta + 1.0))
        })
        .collect()
}

fn true_index(model: &Model, net: &RotationNet) -> Result<usize> {
    if model.is_rotation_invariant() {
        return Err(Error::invalid("model", "rotation-invariant models have no identifiable rotation"));
    }
    net.position_mod_quarter_turn(model.rotation(), SELECTION_TOL)
        .ok_or_else(|| Error::invalid("net", "does not contain the true rotation modulo quarter turns"))
}

/// Fraction of replications whose selected rotation equals the truth modulo
/// quarter turns.
pub fn selection_frequency(model: &Model, rule: &AdaptiveRule, x: Point, n: usize, reps: usize, seed: u64) -> Result<f64> {
    true_index(model, rule.net())?;
    let truth = *model.rotation();
    let hits = replicate(reps, seed, |_, g| {
        let s = model.sample_with(n, g, seed)?;
        let sel = rule.select(&s, x)?;
        Ok(sel.q_hat.same_mod_quarter_turn(&truth, SELECTION_TOL))
    })?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / reps.max(1) as f64)
}

/// Pilot critical multipliers of the true rotation (see [`AdaptiveRule::critical_multiplier`]).
pub fn pilot_critical_multipliers(model: &Model, rule: &AdaptiveRule, x: Point, n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let q = true_index(model, rule.net())?;
    replicate(reps, seed, |_, g| {
        let s = model.sample_with(n, g, seed)?;
        rule.critical_multiplier(&s, x, q)
    })
}

/// `a_mult` whose pilot false-rejection rate of the true rotation is `<= level`.
pub fn calibrate(model: &Model, rule: &AdaptiveRule, x: Point, n: usize, reps: usize, seed: u64, level: f64) -> Result<f64> {
    let crit = pilot_critical_multipliers(model, rule, x, n, reps, seed)?;
    calibrate_a_mult(&crit, level)
}

/// Convenience for tests and the CLI: the model's true rotation.
pub fn true_rotation(model: &Model) -> Rotation {
    *model.rotation()
}
