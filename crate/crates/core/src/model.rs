//! Ground-truth densities `f(x) = g1(u1) g2(u2)` with `u = Qᵀx`, their
//! certification against Hölder classes, sampling, and the `τ_f(D)` integral.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::rotation::{overlap_coeffs, Point, Rotation};

/// Multiplicative slack on every Hölder inequality, absorbing grid and
/// finite-difference error.
pub const HOLDER_SLACK: f64 = 1.02;
/// Step of the finite-difference stencils used for bump derivatives.
pub const FD_STEP: f64 = 1e-3;
/// Accuracy order of the finite-difference stencils.
pub const FD_ORDER: usize = 6;
/// Envelope factor of the rejection sampler relative to the Gaussian component.
pub const ENVELOPE_FACTOR: f64 = 1.5;
/// Smallest `|p1|` accepted by [`Model::tau`] when `D` differs from the model rotation.
pub const TAU_P1_FLOOR: f64 = 1e-6;

const GAUSS_GRID: usize = 4001;
const BUMP_GRID: usize = 2001;
const CDF_TABLE: usize = 4000;

// ---------------------------------------------------------------------------
// Finite differences and bump functions

/// Fornberg weights for the `m`-th derivative at 0 on the given offsets.
fn fornberg(m: usize, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = z[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = z[i];
        for j in 0..i {
            let c3 = z[i] - z[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Central stencil (offsets, weights) of accuracy [`FD_ORDER`] for derivative `m`.
fn central_stencil(m: usize) -> (Vec<f64>, Vec<f64>) {
    let points = 2 * m.div_ceil(2) - 1 + FD_ORDER;
    let half = (points / 2) as i64;
    let offsets: Vec<f64> = (-half..=half).map(|i| i as f64).collect();
    let weights = fornberg(m, &offsets);
    (offsets, weights)
}

fn finite_difference<F: Fn(f64) -> f64>(f: F, m: usize, y: f64) -> f64 {
    if m == 0 {
        return f(y);
    }
    let (offsets, weights) = central_stencil(m);
    let acc: f64 = offsets
        .iter()
        .zip(&weights)
        .map(|(o, w)| w * f(y + o * FD_STEP))
        .sum();
    acc / FD_STEP.powi(m as i32)
}

/// Standard smooth bump `exp(-1/(1-y²))` on `(-1, 1)`.
pub fn bump(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Unscaled perturbation shape `2B(2y) - B(y)`: symmetric, zero mean, positive at 0.
pub fn lambda_shape(y: f64) -> f64 {
    2.0 * bump(2.0 * y) - bump(y)
}

/// Probabilists' Hermite polynomial `He_j(t)`.
fn hermite(j: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    if j == 0 {
        return a;
    }
    for k in 1..j {
        let next = t * b - k as f64 * a;
        a = b;
        b = next;
    }
    b
}

fn gaussian_pdf(y: f64, sigma: f64) -> f64 {
    (-0.5 * (y / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

fn gaussian_derivative(j: usize, y: f64, sigma: f64) -> f64 {
    let t = y / sigma;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite(j, t) * gaussian_pdf(y, sigma) / sigma.powi(j as i32)
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-t / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Hölder classes

/// A function on the real line exposing derivatives and a certification grid.
pub trait Smooth {
    fn derivative(&self, order: usize, y: f64) -> f64;
    fn certification_grid(&self) -> Vec<f64>;
}

/// `β = r + α` with `r = ⌈β⌉ - 1` and `α ∈ (0, 1]`.
pub fn holder_split(beta: f64) -> Result<(usize, f64)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let r = beta.ceil() as usize - 1;
    Ok((r, beta - r as f64))
}

/// Measured Hölder quantities of a function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    pub beta: f64,
    /// `sup |w^(j)|` for `j = 0..=r`, with the maximizing grid point.
    pub sup_derivatives: Vec<(f64, f64)>,
    /// `sup |w^(r)(y+z) - w^(r)(y)| / |z|^α` over grid pairs.
    pub seminorm: f64,
    pub seminorm_pair: (f64, f64),
}

impl HolderReport {
    /// Smallest `L` for which the measured quantities fit in `H(β, L)`.
    pub fn constant(&self) -> f64 {
        self.sup_derivatives
            .iter()
            .map(|d| d.0)
            .fold(self.seminorm, f64::max)
    }
}

/// Outcome of [`holder_certify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub passed: bool,
    pub beta: f64,
    pub l: f64,
    pub report: HolderReport,
    /// Human-readable description of the first violated inequality.
    pub violation: Option<String>,
}

pub fn holder_measure<S: Smooth + ?Sized>(w: &S, beta: f64, grid: &[f64]) -> Result<HolderReport> {
    let (r, alpha) = holder_split(beta)?;
    let mut sup_derivatives = Vec::with_capacity(r + 1);
    let mut top = Vec::new();
    for j in 0..=r {
        let values: Vec<f64> = grid.iter().map(|&y| w.derivative(j, y)).collect();
        let (mut best, mut arg) = (0.0, grid[0]);
        for (&y, &v) in grid.iter().zip(&values) {
            if v.abs() > best {
                best = v.abs();
                arg = y;
            }
        }
        sup_derivatives.push((best, arg));
        if j == r {
            top = values;
        }
    }
    let mut seminorm = 0.0;
    let mut seminorm_pair = (grid[0], grid[0]);
    if alpha == 1.0 {
        // For a Lipschitz bound the steepest grid chord is always between neighbours.
        for i in 1..grid.len() {
            let dz = grid[i] - grid[i - 1];
            if dz <= 0.0 {
                continue;
            }
            let q = (top[i] - top[i - 1]).abs() / dz;
            if q > seminorm {
                seminorm = q;
                seminorm_pair = (grid[i - 1], grid[i]);
            }
        }
    } else {
        let vmax = top.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                let dz = grid[j] - grid[i];
                if dz <= 0.0 {
                    continue;
                }
                let scale = dz.powf(alpha);
                if 2.0 * vmax / scale <= seminorm {
                    break;
                }
                let q = (top[j] - top[i]).abs() / scale;
                if q > seminorm {
                    seminorm = q;
                    seminorm_pair = (grid[i], grid[j]);
                }
            }
        }
    }
    Ok(HolderReport {
        beta,
        sup_derivatives,
        seminorm,
        seminorm_pair,
    })
}

/// Check membership in `H(β, L)` on the function's certification grid.
pub fn holder_certify<S: Smooth + ?Sized>(w: &S, beta: f64, l: f64) -> Result<Certification> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("L", format!("must be positive, got {l}")));
    }
    let grid = w.certification_grid();
    let report = holder_measure(w, beta, &grid)?;
    let bound = HOLDER_SLACK * l;
    let mut violation = None;
    for (j, &(v, y)) in report.sup_derivatives.iter().enumerate() {
        if v > bound {
            violation = Some(format!(
                "|w^({j})(y)| = {v:.6e} exceeds L = {l} at y = {y:.6}"
            ));
            break;
        }
    }
    if violation.is_none() && report.seminorm > bound {
        let (a, b) = report.seminorm_pair;
        violation = Some(format!(
            "Hölder ratio {:.6e} exceeds L = {l} on the pair (y, y+z) = ({a:.6}, {b:.6})",
            report.seminorm
        ));
    }
    Ok(Certification {
        passed: violation.is_none(),
        beta,
        l,
        report,
        violation,
    })
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| a + step * i as f64)
}

/// Grid points closer than this are merged.
const GRID_MERGE_TOL: f64 = 1e-9;

fn merged_grid(parts: &[(f64, f64, usize)]) -> Vec<f64> {
    let mut g: Vec<f64> = parts
        .iter()
        .flat_map(|&(a, b, n)| linspace(a, b, n))
        .collect();
    g.sort_by(f64::total_cmp);
    // Overlapping pieces can produce near-coincident points whose chord
    // slope would be pure finite-difference noise.
    g.dedup_by(|a, b| (*a - *b).abs() <= GRID_MERGE_TOL);
    g
}

// ---------------------------------------------------------------------------
// Marginals

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalKind {
    Gaussian {
        sigma: f64,
    },
    /// `n_σ(y) + L ε^β λ(y/ε)` with `λ = c (2B(2y) - B(y))`.
    PerturbedGaussian {
        sigma: f64,
        beta: f64,
        l: f64,
        eps: f64,
        lambda_scale: f64,
    },
}

/// Symmetric univariate density.
#[derive(Debug, Clone)]
pub struct Marginal {
    kind: MarginalKind,
    /// `∫_{-1}^{t} λ_shape` on an equispaced table over `[-1, 1]`.
    shape_cdf: Option<Arc<Vec<f64>>>,
}

struct ShapeFn;

impl Smooth for ShapeFn {
    fn derivative(&self, order: usize, y: f64) -> f64 {
        finite_difference(lambda_shape, order, y)
    }
    fn certification_grid(&self) -> Vec<f64> {
        merged_grid(&[(-1.05, 1.05, 4201)])
    }
}

/// Scale `c` making `c · λ_shape` a member of `H(β, 1/2)` with measured constant exactly 1/2.
pub fn lambda_scale(beta: f64) -> Result<f64> {
    let grid = ShapeFn.certification_grid();
    let report = holder_measure(&ShapeFn, beta, &grid)?;
    Ok(0.5 / report.constant())
}

/// Smallest `σ` (to bisection precision) whose Gaussian density has measured Hölder
/// constant at most `bound` for smoothness `beta`.
pub fn calibrate_sigma(beta: f64, bound: f64) -> Result<f64> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::invalid("L", format!("must be positive, got {bound}")));
    }
    let measured = |sigma: f64| -> Result<f64> {
        let m = Marginal::gaussian(sigma)?;
        Ok(holder_measure(&m, beta, &m.certification_grid())?.constant())
    };
    let mut hi = 1.0;
    while measured(hi)? > bound {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Certification(format!(
                "no Gaussian scale satisfies H({beta}, {bound})"
            )));
        }
    }
    let mut lo = hi / 2.0;
    while measured(lo)? <= bound {
        lo /= 2.0;
        if lo < 1e-8 {
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if measured(mid)? <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `ε = (ϖ L⁻² capacity / n)^{1/(2β+1)}`, the perturbation width of the lower-bound construction.
pub fn lower_bound_epsilon(varpi: f64, l: f64, capacity: f64, n: f64, beta: f64) -> f64 {
    (varpi * capacity / (l * l * n)).powf(1.0 / (2.0 * beta + 1.0))
}

impl Marginal {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Marginal {
            kind: MarginalKind::Gaussian { sigma },
            shape_cdf: None,
        })
    }

    pub fn standard_gaussian() -> Self {
        Marginal::gaussian(1.0).expect("unit sigma is valid")
    }

    /// `n_σ(y) + L ε^β λ(y/ε)` with `σ` calibrated so that `n_σ ∈ H(β, L/2)` and
    /// `λ ∈ H(β, 1/2)`. Fails if the result is not a positive density in `H(β, L)`.
    pub fn perturbed(beta: f64, l: f64, eps: f64) -> Result<Self> {
        let sigma = calibrate_sigma(beta, l / 2.0)?;
        Self::perturbed_with_sigma(beta, l, eps, sigma)
    }

    /// As [`Marginal::perturbed`] with an explicit Gaussian scale.
    pub fn perturbed_with_sigma(beta: f64, l: f64, eps: f64, sigma: f64) -> Result<Self> {
        holder_split(beta)?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid("L", format!("must be positive, got {l}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid("eps", format!("must lie in (0, 1), got {eps}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
        }
        let lambda_scale = lambda_scale(beta)?;
        let step = 2.0 / CDF_TABLE as f64;
        let mut table = Vec::with_capacity(CDF_TABLE + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 0..CDF_TABLE {
            let a = -1.0 + step * i as f64;
            acc += quadrature::integrate(lambda_shape, a, a + step, 1e-16)
                .or_else(|_| quadrature::integrate(lambda_shape, a, a + step, 1e-13))?
                .value;
            table.push(acc);
        }
        let m = Marginal {
            kind: MarginalKind::PerturbedGaussian {
                sigma,
                beta,
                l,
                eps,
                lambda_scale,
            },
            shape_cdf: Some(Arc::new(table)),
        };
        let grid = m.certification_grid();
        if let Some((y, v)) = grid
            .iter()
            .map(|&y| (y, m.density(y)))
            .find(|&(_, v)| v <= 0.0)
        {
            return Err(Error::Certification(format!(
                "perturbed density is not positive: p({y:.6}) = {v:.6e}"
            )));
        }
        let cert = holder_certify(&m, beta, l)?;
        if !cert.passed {
            return Err(Error::Certification(
                cert.violation.unwrap_or_else(|| "unknown violation".into()),
            ));
        }
        Ok(m)
    }

    pub fn kind(&self) -> &MarginalKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        match self.kind {
            MarginalKind::Gaussian { sigma } | MarginalKind::PerturbedGaussian { sigma, .. } => {
                sigma
            }
        }
    }

    /// Perturbation `L ε^β c`, `ε` and `c` for the perturbed kind.
    fn bump_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            MarginalKind::Gaussian { .. } => None,
            MarginalKind::PerturbedGaussian {
                beta,
                l,
                eps,
                lambda_scale,
                ..
            } => Some((l * eps.powf(beta) * lambda_scale, eps)),
        }
    }

    /// The scaled perturbation `λ(y) = c λ_shape(y)`, if any.
    pub fn lambda(&self, y: f64) -> f64 {
        match self.kind {
            MarginalKind::PerturbedGaussian { lambda_scale, .. } => lambda_scale * lambda_shape(y),
            MarginalKind::Gaussian { .. } => 0.0,
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        let base = gaussian_pdf(y, self.sigma());
        match self.bump_params() {
            None => base,
            Some((amp, eps)) => base + amp * lambda_shape(y / eps),
        }
    }

    fn shape_cdf(&self, t: f64) -> f64 {
        let table = self.shape_cdf.as_ref().expect("perturbed marginal has a table");
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return table[CDF_TABLE];
        }
        let step = 2.0 / CDF_TABLE as f64;
        let pos = (t + 1.0) / step;
        let i = (pos.floor() as usize).min(CDF_TABLE - 1);
        let s = pos - i as f64;
        let (y0, y1) = (table[i], table[i + 1]);
        let a = -1.0 + step * i as f64;
        let (d0, d1) = (lambda_shape(a) * step, lambda_shape(a + step) * step);
        // cubic Hermite
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let base = std_normal_cdf(y / self.sigma());
        match self.bump_params() {
            None => base,
            Some((amp, eps)) => base + amp * eps * self.shape_cdf(y / eps),
        }
    }

    /// `sup_y p(y) / n_σ(y)` on the certification grid.
    pub fn envelope_ratio(&self) -> f64 {
        let sigma = self.sigma();
        self.certification_grid()
            .iter()
            .map(|&y| self.density(y) / gaussian_pdf(y, sigma))
            .fold(1.0, f64::max)
    }

    /// Draw one variate; the perturbed kind uses rejection from `1.5 n_σ`.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let sigma = self.sigma();
        match self.bump_params() {
            None => sigma * rng.sample::<f64, _>(StandardNormal),
            Some(_) => loop {
                let y = sigma * rng.sample::<f64, _>(StandardNormal);
                let u: f64 = rng.gen();
                if u * ENVELOPE_FACTOR * gaussian_pdf(y, sigma) <= self.density(y) {
                    break y;
                }
            },
        }
    }

    pub fn is_perturbed(&self) -> bool {
        self.bump_params().is_some()
    }

    /// Interval outside of which the density is below ~1e-30 relative to its peak.
    pub fn effective_support(&self) -> f64 {
        12.0 * self.sigma()
    }
}

impl Smooth for Marginal {
    fn derivative(&self, order: usize, y: f64) -> f64 {
        let base = gaussian_derivative(order, y, self.sigma());
        match self.bump_params() {
            None => base,
            Some((amp, eps)) => {
                base + amp * eps.powi(-(order as i32)) * finite_difference(lambda_shape, order, y / eps)
            }
        }
    }

    fn certification_grid(&self) -> Vec<f64> {
        let s = self.sigma();
        match self.bump_params() {
            None => merged_grid(&[(-8.0 * s, 8.0 * s, GAUSS_GRID)]),
            Some((_, eps)) => merged_grid(&[(-8.0 * s, 8.0 * s, GAUSS_GRID), (-eps, eps, BUMP_GRID)]),
        }
    }
}

/// Any closure on the real line with finite-difference derivatives.
pub struct FnSmooth<F> {
    pub f: F,
    pub grid: Vec<f64>,
}

impl<F: Fn(f64) -> f64> Smooth for FnSmooth<F> {
    fn derivative(&self, order: usize, y: f64) -> f64 {
        finite_difference(&self.f, order, y)
    }
    fn certification_grid(&self) -> Vec<f64> {
        self.grid.clone()
    }
}

// ---------------------------------------------------------------------------
// Models

/// `f(x) = g1(u1) g2(u2)`, `u = Qᵀx`, with both marginals in `H(β, L)`.
#[derive(Debug, Clone)]
pub struct Model {
    marginals: [Marginal; 2],
    rotation: Rotation,
    beta: f64,
    l: f64,
}

/// `n` observations in the plane with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub points: Vec<Point>,
    pub seed: u64,
    pub model_id: String,
}

impl Sample {
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::SampleTooSmall {
                n: 0,
                reason: "a sample needs at least one point".into(),
            });
        }
        if let Some(i) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::invalid("points", format!("point {i} is not finite")));
        }
        Ok(Sample {
            points,
            seed: 0,
            model_id: "external".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Contiguous sub-sample `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Sample {
        Sample {
            points: self.points[start..end].to_vec(),
            seed: self.seed,
            model_id: format!("{}[{start}..{end}]", self.model_id),
        }
    }
}

impl Model {
    /// Build a model, certifying both marginals in `H(β, L)`.
    pub fn new(marginal1: Marginal, marginal2: Marginal, rotation: Rotation, beta: f64, l: f64) -> Result<Self> {
        for (i, m) in [&marginal1, &marginal2].into_iter().enumerate() {
            let cert = holder_certify(m, beta, l)?;
            if !cert.passed {
                return Err(Error::Certification(format!(
                    "marginal{}: {}",
                    i + 1,
                    cert.violation.unwrap_or_default()
                )));
            }
        }
        Ok(Model {
            marginals: [marginal1, marginal2],
            rotation,
            beta,
            l,
        })
    }

    pub fn standard_gaussian(rotation: Rotation) -> Self {
        Model::new(
            Marginal::standard_gaussian(),
            Marginal::standard_gaussian(),
            rotation,
            2.0,
            1.0,
        )
        .expect("standard Gaussian lies in H(2, 1)")
    }

    /// Both marginals perturbed (`ε = 0.5`, `β = 2`, `L = 1`) and rotated by 30°.
    pub fn default_experiment() -> Result<Self> {
        let m = Marginal::perturbed(2.0, 1.0, 0.5)?;
        Model::new(m.clone(), m, Rotation::from_degrees(30.0)?, 2.0, 1.0)
    }

    pub fn marginal(&self, i: usize) -> &Marginal {
        &self.marginals[i]
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn id(&self) -> String {
        let kind = |m: &Marginal| match m.kind {
            MarginalKind::Gaussian { sigma } => format!("gauss({sigma})"),
            MarginalKind::PerturbedGaussian { sigma, eps, .. } => format!("pert({sigma:.6},{eps})"),
        };
        format!(
            "{}x{}@{:.9}/b{}/L{}",
            kind(&self.marginals[0]),
            kind(&self.marginals[1]),
            self.rotation.theta(),
            self.beta,
            self.l
        )
    }

    /// The same model with its rotation replaced by `r · Q`.
    pub fn rotated(&self, r: &Rotation) -> Model {
        Model {
            rotation: r.compose(&self.rotation),
            ..self.clone()
        }
    }

    /// Product of the marginal densities at `y` (the density `g`).
    pub fn g(&self, y: Point) -> f64 {
        self.marginals[0].density(y[0]) * self.marginals[1].density(y[1])
    }

    pub fn density(&self, x: Point) -> f64 {
        self.g(self.rotation.apply_transpose(x))
    }

    /// True when every rotation represents this density equally well.
    pub fn is_rotation_invariant(&self) -> bool {
        match (self.marginals[0].kind, self.marginals[1].kind) {
            (MarginalKind::Gaussian { sigma: a }, MarginalKind::Gaussian { sigma: b }) => a == b,
            _ => false,
        }
    }

    pub fn draw_point(&self, rng: &mut ChaCha8Rng) -> Point {
        let xi = [self.marginals[0].draw(rng), self.marginals[1].draw(rng)];
        self.rotation.apply(xi)
    }

    fn check_envelope(&self) -> Result<()> {
        for (i, m) in self.marginals.iter().enumerate() {
            if m.is_perturbed() {
                let r = m.envelope_ratio();
                if r > ENVELOPE_FACTOR {
                    return Err(Error::Certification(format!(
                        "marginal{}: density exceeds {ENVELOPE_FACTOR} x Gaussian envelope (ratio {r:.4})",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// `n` draws from the generator seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.sample_with(n, &mut rng::seeded(seed), seed)
    }

    /// `n` draws from an existing generator; `seed` is recorded for provenance.
    pub fn sample_with(&self, n: usize, rng: &mut ChaCha8Rng, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        self.check_envelope()?;
        let points = (0..n).map(|_| self.draw_point(rng)).collect();
        Ok(Sample {
            points,
            seed,
            model_id: self.id(),
        })
    }

    /// `τ_f(D)`: the large-sample target of the product estimator along `D`.
    ///
    /// For `D = Q_f` this is `f(x)`; otherwise it is the 2-D integral
    /// `∫ g(p1 Γ u) g(p1⁻¹ D Ω x + p2 Ω Γ u) du` with `(p1, p2) = (p1, p2)(D, Q_f)`.
    pub fn tau(&self, d: &Rotation, x: Point, tol: f64) -> Result<f64> {
        if d.same_as(&self.rotation) {
            return Ok(self.density(x));
        }
        let (p1, p2) = overlap_coeffs(d, &self.rotation);
        if p1.abs() < TAU_P1_FLOOR {
            return Err(Error::invalid(
                "d_rot",
                format!("|p1| = {:.3e} below floor {TAU_P1_FLOOR:e} for D != Q_f", p1.abs()),
            ));
        }
        // D Ω x = D (x2, x1)
        let shift = d.apply([x[1], x[0]]);
        let c = [shift[0] / p1, shift[1] / p1];
        let integrand = |u1: f64, u2: f64| {
            // Γu = (u1, -u2); ΩΓu = (-u2, u1)
            self.g([p1 * u1, -p1 * u2]) * self.g([c[0] - p2 * u2, c[1] + p2 * u1])
        };
        let reach = [0, 1].map(|i| self.marginals[i].effective_support() / p1.abs());
        let breaks = |i: usize| -> Vec<f64> {
            let mut b = vec![-reach[i], reach[i]];
            if let MarginalKind::PerturbedGaussian { eps, .. } = self.marginals[i].kind {
                let e = eps / p1.abs();
                if e < reach[i] {
                    b.extend([-e, 0.0, e]);
                }
            }
            b.sort_by(f64::total_cmp);
            b
        };
        let e = quadrature::integrate_2d(integrand, &breaks(0), &breaks(1), tol)?;
        Ok(e.value)
    }
}
