//! Data-driven choice of bandwidth and rotation.
//!
//! [`AdaptiveRule`] compares every combined estimate with every product
//! estimate at a finer bandwidth and penalizes by `A Û √(ln n / (n h))`.
//! [`minimax_select`] runs the adaptive rule on a first chunk of the sample
//! and then tests fixed bandwidths `h_i` on the later chunks of a
//! [`SplitPlan`].

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{product_unchecked, BandwidthGrid, PairIndex, UStatMode};
use crate::kernel::Kernel;
use crate::model::Sample;
use crate::rotation::{Point, Rotation, RotationNet};

/// Factor of the `B` constant independent of kernel, class and net.
pub const B_LEADING: f64 = 527_730.0;

/// `max(1, max(1, capacity) / ln n)`.
pub fn alpha(capacity: f64, n: f64) -> f64 {
    (capacity.max(1.0) / n.ln()).max(1.0)
}

/// `C(β) = 1 ∨ sup_{n >= 3} (ln n)² n^{-2β/(2β+1)}`.
///
/// The map is unimodal in `n` with its peak at `ln n = (2β+1)/β`, so the
/// supremum over integers is attained at 3 or at a neighbour of the peak.
pub fn c_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let term = |n: f64| n.ln().powi(2) * n.powf(-2.0 * beta / (2.0 * beta + 1.0));
    let peak = ((2.0 * beta + 1.0) / beta).exp();
    let mut best = term(3.0);
    for cand in [peak.floor(), peak.ceil()] {
        if cand >= 3.0 && cand.is_finite() {
            best = best.max(term(cand));
        }
    }
    Ok(best.max(1.0))
}

/// `12 √(10 p α) (1 + √(5p)) [1 ∨ sup_norm] + 4 capacity`, with `capacity`
/// standing for `C(K, mb, √2)`.
pub fn constant_a_from_parts(p: f64, alpha: f64, sup_norm: f64, capacity: f64) -> f64 {
    12.0 * (10.0 * p * alpha).sqrt() * (1.0 + (5.0 * p).sqrt()) * sup_norm.max(1.0) + 4.0 * capacity
}

/// `A` for a concrete kernel, with `C(K, b, √2)` by quadrature.
pub fn constant_a(p: f64, alpha: f64, kernel: &Kernel, b: f64) -> Result<f64> {
    check_p_alpha(p, alpha)?;
    let c = kernel.capacity_constant(b, SQRT_2)?;
    Ok(constant_a_from_parts(p, alpha, kernel.sup_norm(), c))
}

/// Inputs of `B` that depend on the kernel, exposed so the arithmetic can be
/// checked with injected values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BParts {
    /// `‖K‖₁² ∨ ‖K‖₂² ∨ ‖K‖∞²`.
    pub norm_max: f64,
    pub c_beta: f64,
    /// `C(K, β, √2)`.
    pub capacity: f64,
}

pub fn constant_b_from_parts(p: f64, alpha: f64, beta: f64, l: f64, parts: BParts) -> f64 {
    let e = 2.0 * beta + 1.0;
    B_LEADING
        * p
        * p
        * 6f64.sqrt()
        * parts.norm_max
        * (9.0 + 4.0 * alpha).powf((3.0 * beta + 3.0) / e)
        * parts.c_beta.powf(1.5)
        * l.powf((4.0 * beta + 8.0) / e)
        + 8.0 * parts.capacity * l * l
}

/// `B` for a concrete kernel; the capacity term uses `mb = β`.
pub fn constant_b(p: f64, alpha: f64, beta: f64, l: f64, kernel: &Kernel) -> Result<f64> {
    check_p_alpha(p, alpha)?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("l", format!("must be positive, got {l}")));
    }
    let parts = BParts {
        norm_max: kernel
            .l1_norm()
            .powi(2)
            .max(kernel.l2_norm_sq())
            .max(kernel.sup_norm().powi(2)),
        c_beta: c_beta(beta)?,
        capacity: kernel.capacity_constant(beta, SQRT_2)?,
    };
    Ok(constant_b_from_parts(p, alpha, beta, l, parts))
}

fn check_p_alpha(p: f64, alpha: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("must be >= 1, got {p}")));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be >= 1, got {alpha}")));
    }
    Ok(())
}

fn ensure_net(net: &RotationNet) -> Result<()> {
    if net.is_empty() {
        return Err(Error::invalid("net", "must be nonempty"));
    }
    Ok(())
}

/// `sup_{η ∈ mH, D ∈ net, b ∈ {d, d⊥}} 1 ∨ [n⁻¹ Σ |K_η(bᵀ(X_k - x))|]²`.
pub fn u_hat(kernel: &Kernel, sample: &Sample, x: Point, net: &RotationNet, grid: &BandwidthGrid) -> Result<f64> {
    ensure_net(net)?;
    let n = sample.len() as f64;
    let mut best = 1.0f64;
    for &eta in grid.restricted() {
        for d in net.members() {
            for b in [d.col(), d.col_perp()] {
                let bx = b[0] * x[0] + b[1] * x[1];
                let s: f64 = sample
                    .points
                    .iter()
                    .map(|p| kernel.eval((b[0] * p[0] + b[1] * p[1] - bx) / eta).abs())
                    .sum();
                let avg = s / (eta * n);
                best = best.max(avg * avg);
            }
        }
    }
    Ok(best)
}

/// Number of estimator evaluations performed by one selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    /// Cells of the `(η, D, Q)` combined-estimate table.
    pub combined: usize,
    /// Cells of the `(η, D)` product-estimate table.
    pub product: usize,
}

impl EvalCounts {
    pub fn total(&self) -> usize {
        self.combined + self.product
    }
}

/// Outcome of the adaptive rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub h_hat: f64,
    pub q_hat: Rotation,
    pub q_index: usize,
    /// `f̃_{ĥ, Q̂}(x)`.
    pub estimate: f64,
    pub u_hat: f64,
    /// Theoretical `A` before the multiplier.
    pub a_theory: f64,
    pub a_mult: f64,
    /// Restricted grid, decreasing; columns of the tables below.
    pub grid: Vec<f64>,
    /// `r_surface[q][j] = R_n(Q_q, grid[j])`.
    pub r_surface: Vec<Vec<f64>>,
    /// `r_surface` plus the penalty.
    pub criterion: Vec<Vec<f64>>,
    pub counts: EvalCounts,
}

/// Estimate tables for one sample at one query point.
struct Tables {
    grid: Vec<f64>,
    /// `combined[e][d][q]`.
    combined: Vec<Vec<Vec<f64>>>,
    /// `product[e][d]`.
    product: Vec<Vec<f64>>,
    u_hat: f64,
    counts: EvalCounts,
}

impl Tables {
    /// `Q` restricts the combined table to a subset of net indices.
    fn fill(
        kernel: &Kernel,
        sample: &Sample,
        x: Point,
        net: &RotationNet,
        grid: &BandwidthGrid,
        mode: UStatMode,
        qs: &[usize],
    ) -> Result<Tables> {
        let members = net.members();
        let etas = grid.restricted().to_vec();
        let index = match mode {
            UStatMode::Pruned => Some(PairIndex::new(sample)),
            UStatMode::Naive => None,
        };
        let nd = members.len();
        let cells: Vec<(usize, usize, usize)> = (0..etas.len())
            .flat_map(|e| (0..nd).flat_map(move |d| qs.iter().map(move |&q| (e, d, q))))
            .collect();
        let values: Vec<f64> = cells
            .par_iter()
            .map(|&(e, d, q)| match &index {
                Some(ix) => ix.auxiliary(kernel, x, etas[e], &members[d], &members[q]),
                None => crate::estimator::auxiliary_estimate(
                    kernel, sample, x, etas[e], &members[d], &members[q], UStatMode::Naive,
                ),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut combined = vec![vec![vec![f64::NAN; nd]; nd]; etas.len()];
        for (&(e, d, q), v) in cells.iter().zip(values) {
            combined[e][d][q] = v;
        }
        let product: Vec<Vec<f64>> = etas
            .iter()
            .map(|&eta| {
                members
                    .iter()
                    .map(|d| product_unchecked(kernel, &sample.points, x, eta, d))
                    .collect()
            })
            .collect();
        let u_hat = u_hat(kernel, sample, x, net, grid)?;
        let counts = EvalCounts {
            combined: cells.len(),
            product: etas.len() * nd,
        };
        Ok(Tables {
            grid: etas,
            combined,
            product,
            u_hat,
            counts,
        })
    }

    /// `v[i][j] = max_D |T(η_i, D, Q) - P(η_j, D)|` for `j >= i` (`η_j <= η_i`).
    fn discrepancies(&self, q: usize) -> Vec<Vec<f64>> {
        let m = self.grid.len();
        let mut v = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                v[i][j] = self.combined[i]
                    .iter()
                    .zip(&self.product[j])
                    .map(|(row, p)| (row[q] - p).abs())
                    .fold(0.0, f64::max);
            }
        }
        v
    }
}

/// The adaptive rule with its kernel-dependent constants cached.
#[derive(Debug, Clone)]
pub struct AdaptiveRule {
    kernel: Kernel,
    net: RotationNet,
    p: f64,
    a_mult: f64,
    /// `C(K, mb, √2)`.
    capacity_c: f64,
    mode: UStatMode,
    alpha: Option<f64>,
}

impl AdaptiveRule {
    /// `mb` is the exponent bound inside `C(K, mb, √2)`.
    pub fn new(kernel: Kernel, net: RotationNet, p: f64, a_mult: f64, mb: f64) -> Result<Self> {
        ensure_net(&net)?;
        check_p_alpha(p, 1.0)?;
        if !(a_mult > 0.0 && a_mult.is_finite()) {
            return Err(Error::invalid("a_mult", format!("must be positive, got {a_mult}")));
        }
        let capacity_c = kernel.capacity_constant(mb, SQRT_2)?;
        Ok(AdaptiveRule {
            kernel,
            net,
            p,
            a_mult,
            capacity_c,
            mode: UStatMode::Pruned,
            alpha: None,
        })
    }

    pub fn with_mode(mut self, mode: UStatMode) -> Self {
        self.mode = mode;
        self
    }

    /// Overrides the default `α` evaluated at the sample size.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_p_alpha(self.p, alpha)?;
        self.alpha = Some(alpha);
        Ok(self)
    }

    pub fn with_a_mult(mut self, a_mult: f64) -> Result<Self> {
        if !(a_mult > 0.0 && a_mult.is_finite()) {
            return Err(Error::invalid("a_mult", format!("must be positive, got {a_mult}")));
        }
        self.a_mult = a_mult;
        Ok(self)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn net(&self) -> &RotationNet {
        &self.net
    }

    pub fn a_mult(&self) -> f64 {
        self.a_mult
    }

    /// Theoretical `A` at sample size `n`.
    pub fn a_theory(&self, n: usize) -> f64 {
        let alpha = self
            .alpha
            .unwrap_or_else(|| alpha(self.net.capacity(), n as f64));
        constant_a_from_parts(self.p, alpha, self.kernel.sup_norm(), self.capacity_c)
    }

    pub fn select(&self, sample: &Sample, x: Point) -> Result<SelectionResult> {
        let n = sample.len();
        let grid = BandwidthGrid::new(n)?;
        let all: Vec<usize> = (0..self.net.len()).collect();
        let t = Tables::fill(&self.kernel, sample, x, &self.net, &grid, self.mode, &all)?;
        let a_theory = self.a_theory(n);
        let scale = self.a_mult * a_theory * t.u_hat;
        let ln_n = (n as f64).ln();
        let pen: Vec<f64> = t
            .grid
            .iter()
            .map(|&h| scale * (ln_n / (n as f64 * h)).sqrt())
            .collect();
        let m = t.grid.len();
        let mut r_surface = Vec::with_capacity(self.net.len());
        let mut criterion = Vec::with_capacity(self.net.len());
        for q in 0..self.net.len() {
            let v = t.discrepancies(q);
            // best[i] = max_{j >= i} [v[i][j] - pen[j]]₊
            let row_best: Vec<f64> = (0..m)
                .map(|i| (i..m).map(|j| (v[i][j] - pen[j]).max(0.0)).fold(0.0, f64::max))
                .collect();
            // R(Q, η_k) = max_{i >= k} row_best[i]
            let mut r = vec![0.0; m];
            let mut acc = 0.0f64;
            for k in (0..m).rev() {
                acc = acc.max(row_best[k]);
                r[k] = acc;
            }
            criterion.push(r.iter().zip(&pen).map(|(a, b)| a + b).collect::<Vec<f64>>());
            r_surface.push(r);
        }
        let (mut bq, mut bh) = (0, 0);
        for (q, row) in criterion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c < criterion[bq][bh] {
                    bq = q;
                    bh = j;
                }
            }
        }
        Ok(SelectionResult {
            h_hat: t.grid[bh],
            q_hat: self.net.members()[bq],
            q_index: bq,
            estimate: t.product[bh][bq],
            u_hat: t.u_hat,
            a_theory,
            a_mult: self.a_mult,
            grid: t.grid,
            r_surface,
            criterion,
            counts: t.counts,
        })
    }

    /// Smallest multiplier for which `R_n(Q_q, h_max) = 0` on this sample:
    /// `max_{η' <= η, D} |T(η, D, Q) - P(η', D)| / (A Û √(ln n / (n η')))`.
    pub fn critical_multiplier(&self, sample: &Sample, x: Point, q: usize) -> Result<f64> {
        if q >= self.net.len() {
            return Err(Error::invalid("q", format!("net index {q} out of range")));
        }
        let n = sample.len();
        let grid = BandwidthGrid::new(n)?;
        let t = Tables::fill(&self.kernel, sample, x, &self.net, &grid, self.mode, &[q])?;
        let base = self.a_theory(n) * t.u_hat;
        let ln_n = (n as f64).ln();
        let v = t.discrepancies(q);
        let mut worst = 0.0f64;
        for (i, row) in v.iter().enumerate() {
            for (j, &d) in row.iter().enumerate().skip(i) {
                worst = worst.max(d / (base * (ln_n / (n as f64 * t.grid[j])).sqrt()));
            }
        }
        Ok(worst)
    }
}

/// Multiplier keeping the false-rejection rate of the true rotation at or
/// below `level` over pilot samples: the `⌈(1 - level) R⌉`-th smallest
/// critical multiplier.
pub fn calibrate_a_mult(critical: &[f64], level: f64) -> Result<f64> {
    if critical.is_empty() {
        return Err(Error::invalid("critical", "need at least one pilot replication"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let mut v = critical.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((1.0 - level) * v.len() as f64).ceil() as usize;
    let m = v[k.clamp(1, v.len()) - 1];
    // A zero multiplier is not admissible; any positive value rejects nothing.
    Ok(if m > 0.0 { m } else { f64::MIN_POSITIVE })
}

/// Data-splitting plan of the minimax rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPlan {
    pub n: u128,
    /// `ℓ_0 = ln n`, `ℓ_i = ln ℓ_{i-1}` up to `i*`.
    pub ell: Vec<f64>,
    /// `ω_i = (ℓ_i ∨ 4) + capacity` for `i = 0..=i*`.
    pub omega: Vec<f64>,
    pub i_star: usize,
    /// `n_i` for `i = 1..=i*` (index 0 holds `⌊n/4⌋`).
    pub sizes: Vec<u128>,
    /// `N_i` for `i = 0..i*`.
    pub boundaries: Vec<u128>,
}

impl SplitPlan {
    /// Plan for a sample of size `n`; `n` may exceed any realizable sample.
    pub fn new(n: u128, net_capacity: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::SampleTooSmall {
                n: n as usize,
                reason: "split plans need n >= 16".into(),
            });
        }
        let nf = n as f64;
        let mut ell = vec![nf.ln()];
        let mut omega = vec![ell[0].max(4.0) + net_capacity];
        loop {
            let next = ell.last().copied().unwrap_or(0.0).ln();
            ell.push(next);
            omega.push(next.max(4.0) + net_capacity);
            if next <= 4.0 {
                break;
            }
        }
        let i_star = ell.len() - 1;
        let mut sizes = vec![n / 4];
        let mut boundaries = vec![n / 4];
        for &l in ell.iter().take(i_star).skip(1) {
            let ni = (nf / l).floor() as u128;
            sizes.push(ni);
            boundaries.push(boundaries.last().copied().unwrap_or(0) + ni);
        }
        let last = *boundaries.last().unwrap_or(&0);
        sizes.push(n - last);
        Ok(SplitPlan {
            n,
            ell,
            omega,
            i_star,
            sizes,
            boundaries,
        })
    }

    /// Half-open 0-based ranges `X^(0), ..., X^(i*)`.
    pub fn chunks(&self) -> Vec<(u128, u128)> {
        let mut out = Vec::with_capacity(self.i_star + 1);
        let mut start = 0;
        for &b in &self.boundaries {
            out.push((start, b));
            start = b;
        }
        out.push((start, self.n));
        out
    }
}

/// Per-stage diagnostics of the minimax rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxStage {
    pub stage: usize,
    pub chunk: (usize, usize),
    pub h: f64,
    /// `R^(i)(Q)` for each net member.
    pub r_values: Vec<f64>,
    pub q_index: usize,
    /// `f̃^(i)_{h_i, Q̂^(i)}(x)`.
    pub stage_estimate: f64,
    /// True when `R^(i)(Q̂^(i)) = 0` and the stage estimate was adopted.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxResult {
    pub estimate: f64,
    pub h_hat: f64,
    pub q_hat: Rotation,
    pub q_index: usize,
    pub b_theory: f64,
    pub b_mult: f64,
    pub plan: SplitPlan,
    pub stage0: SelectionResult,
    pub stages: Vec<MinimaxStage>,
}

/// Options of the minimax rule beyond the class parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxOptions {
    pub b_mult: f64,
    pub a_mult: f64,
    pub p: f64,
    /// Use the whole sample for every stage (only when `i* = 1`).
    pub no_split: bool,
    pub mode: UStatMode,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions {
            b_mult: 1.0,
            a_mult: 1.0,
            p: 2.0,
            no_split: false,
            mode: UStatMode::Pruned,
        }
    }
}

/// Smallest sample for which the first chunk supports a bandwidth grid.
pub const MINIMAX_MIN_N: usize = 136;

/// The minimax rule for known `(β, L)`.
pub fn minimax_select(
    sample: &Sample,
    x: Point,
    net: &RotationNet,
    kernel: &Kernel,
    beta: f64,
    l: f64,
    opts: MinimaxOptions,
) -> Result<MinimaxResult> {
    ensure_net(net)?;
    let n = sample.len();
    if n < MINIMAX_MIN_N {
        return Err(Error::SampleTooSmall {
            n,
            reason: format!("the minimax rule needs n >= {MINIMAX_MIN_N} so that the first chunk has a bandwidth grid"),
        });
    }
    if !(opts.b_mult > 0.0 && opts.b_mult.is_finite()) {
        return Err(Error::invalid("b_mult", format!("must be positive, got {}", opts.b_mult)));
    }
    let plan = SplitPlan::new(n as u128, net.capacity())?;
    if opts.no_split && plan.i_star != 1 {
        return Err(Error::invalid("no_split", "only available when i* = 1"));
    }
    let alpha_n = alpha(net.capacity(), n as f64);
    let b_theory = constant_b(opts.p, alpha_n, beta, l, kernel)?;
    let threshold = opts.b_mult * b_theory * l * l;

    let chunks: Vec<(usize, usize)> = if opts.no_split {
        vec![(0, n); plan.i_star + 1]
    } else {
        plan.chunks().into_iter().map(|(a, b)| (a as usize, b as usize)).collect()
    };

    let rule = AdaptiveRule::new(kernel.clone(), net.clone(), opts.p, opts.a_mult, beta)?.with_mode(opts.mode);
    let (s0, e0) = chunks[0];
    let stage0 = rule.select(&sample.slice(s0, e0), x)?;
    let mut estimate = stage0.estimate;
    let mut h_hat = stage0.h_hat;
    let mut q_index = stage0.q_index;

    let members = net.members();
    let mut stages = Vec::with_capacity(plan.i_star);
    for (i, &(start, end)) in chunks.iter().enumerate().skip(1) {
        let chunk = sample.slice(start, end);
        let ni = chunk.len();
        if ni < 2 {
            return Err(Error::SampleTooSmall {
                n: ni,
                reason: format!("chunk {i} has fewer than two observations"),
            });
        }
        let h = (plan.omega[i] / (l.powi(4) * ni as f64)).powf(1.0 / (2.0 * beta + 1.0));
        let penalty = threshold * h.powf(beta);
        let index = match opts.mode {
            UStatMode::Pruned => Some(PairIndex::new(&chunk)),
            UStatMode::Naive => None,
        };
        let product: Vec<f64> = members
            .iter()
            .map(|d| product_unchecked(kernel, &chunk.points, x, h, d))
            .collect();
        let mut r_values = Vec::with_capacity(members.len());
        for q in members {
            let mut r = 0.0f64;
            for (d, pd) in members.iter().zip(&product) {
                let t = match &index {
                    Some(ix) => ix.auxiliary(kernel, x, h, d, q)?,
                    None => crate::estimator::auxiliary_estimate(kernel, &chunk, x, h, d, q, UStatMode::Naive)?,
                };
                r = r.max(((t - pd).abs() - penalty).max(0.0));
            }
            r_values.push(r);
        }
        let mut qi = 0;
        for (j, &r) in r_values.iter().enumerate() {
            if r < r_values[qi] {
                qi = j;
            }
        }
        let accepted = r_values[qi] == 0.0;
        if accepted {
            estimate = product[qi];
            h_hat = h;
            q_index = qi;
        }
        stages.push(MinimaxStage {
            stage: i,
            chunk: (start, end),
            h,
            r_values,
            q_index: qi,
            stage_estimate: product[qi],
            accepted,
        });
    }
    Ok(MinimaxResult {
        estimate,
        h_hat,
        q_hat: members[q_index],
        q_index,
        b_theory,
        b_mult: opts.b_mult,
        plan,
        stage0,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::product_estimate;
    use crate::model::Model;

    fn deg(d: f64) -> Rotation {
        Rotation::from_degrees(d).unwrap()
    }

    #[test]
    fn injected_a() {
        let a = constant_a_from_parts(1.0, 1.0, 1.0, 0.0);
        assert!((a - 12.0 * 10f64.sqrt() * (1.0 + 5f64.sqrt())).abs() < 1e-12);
        assert!((a - 122.800_145_664).abs() < 1e-8);
        assert!((a / 122.797 - 1.0).abs() < 1e-4);
        assert!(constant_a_from_parts(2.0, 1.0, 1.0, 0.0) > a);
    }

    #[test]
    fn injected_b() {
        let parts = BParts {
            norm_max: 1.0,
            c_beta: 1.0,
            capacity: 0.0,
        };
        let b = constant_b_from_parts(1.0, 1.0, 1.0, 1.0, parts);
        assert!((b - 527_730.0 * 6f64.sqrt() * 169.0).abs() < 1e-6);
        assert!((b / 2.1848e8 - 1.0).abs() < 1e-3);
        let b2 = constant_b_from_parts(1.0, 1.0, 1.0, 1.5, parts);
        assert!(b2 > b);
    }

    #[test]
    fn c_beta_matches_scan() {
        for beta in [0.5, 1.0, 2.0, 3.5] {
            let scan = (3..=1_000_000u32)
                .map(|n| {
                    let n = f64::from(n);
                    n.ln().powi(2) * n.powf(-2.0 * beta / (2.0 * beta + 1.0))
                })
                .fold(1.0f64, f64::max);
            assert!((c_beta(beta).unwrap() - scan).abs() < 1e-12, "beta {beta}");
        }
        assert!((c_beta(1.0).unwrap() - 1.2180).abs() < 1e-3);
    }

    #[test]
    fn alpha_floor() {
        assert_eq!(alpha(0.0, 100.0), 1.0);
        assert!((alpha(10.0, 100.0) - 10.0 / 100f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn u_hat_floor_and_far_sample() {
        let k = Kernel::new(1);
        let far = Sample::from_points((0..40).map(|i| [50.0 + i as f64, 50.0]).collect()).unwrap();
        let grid = BandwidthGrid::new(40).unwrap();
        let net = RotationNet::build(0.3).unwrap();
        assert_eq!(u_hat(&k, &far, [0.0, 0.0], &net, &grid).unwrap(), 1.0);
    }

    #[test]
    fn split_plan_examples() {
        let p = SplitPlan::new(1_000_000, 2f64.ln()).unwrap();
        assert!((p.ell[0] - 13.815_510_557_964_274).abs() < 1e-12);
        assert!((p.ell[1] - 2.625_791_914_476_839).abs() < 1e-9);
        assert_eq!(p.i_star, 1);
        assert_eq!(p.boundaries, vec![250_000]);
        assert_eq!(p.chunks(), vec![(0, 250_000), (250_000, 1_000_000)]);
        assert!((p.omega[1] - (4.0 + 2f64.ln())).abs() < 1e-15);

        let big = SplitPlan::new(10u128.pow(30), 0.0).unwrap();
        assert!((big.ell[1] - 4.235).abs() < 1e-3);
        assert!((big.ell[2] - 1.443).abs() < 1e-3);
        assert_eq!(big.i_star, 2);
        let chunks = big.chunks();
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[2].1, 10u128.pow(30));
        assert!(big.boundaries[big.i_star - 1] * 4 < 3 * big.n);
    }

    #[test]
    fn adaptive_singleton_net() {
        let k = Kernel::new(1);
        let q = deg(30.0);
        let m = Model::standard_gaussian(q);
        let s = m.sample(300, 4).unwrap();
        let rule = AdaptiveRule::new(k.clone(), RotationNet::singleton(q), 2.0, 0.05, 1.0).unwrap();
        let r = rule.select(&s, [0.0, 0.0]).unwrap();
        assert_eq!(r.q_index, 0);
        assert!(r.grid.contains(&r.h_hat));
        assert_eq!(r.estimate, product_estimate(&k, &s, [0.0, 0.0], r.h_hat, &q).unwrap());
        for row in &r.r_surface {
            assert!(row.iter().all(|&v| v >= 0.0));
            // R is monotone in h (grid is decreasing)
            assert!(row.windows(2).all(|w| w[0] >= w[1]));
        }
        let m_len = r.grid.len();
        assert_eq!(r.counts.combined, m_len);
        assert_eq!(r.counts.product, m_len);
        assert_eq!(rule.select(&s, [0.0, 0.0]).unwrap(), r);
    }

    #[test]
    fn eval_counts_scale_with_net() {
        let k = Kernel::new(1);
        let net = RotationNet::build(0.3).unwrap();
        let s = Model::standard_gaussian(deg(0.0)).sample(200, 2).unwrap();
        let rule = AdaptiveRule::new(k, net.clone(), 2.0, 1.0, 1.0).unwrap();
        let r = rule.select(&s, [0.1, 0.0]).unwrap();
        let m = BandwidthGrid::new(200).unwrap().restricted().len();
        assert_eq!(r.counts.combined, m * net.len() * net.len());
        assert_eq!(r.counts.product, m * net.len());
    }

    #[test]
    fn calibration_quantile() {
        let crit: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(calibrate_a_mult(&crit, 0.05).unwrap(), 95.0);
        assert!(calibrate_a_mult(&[], 0.05).is_err());
        assert!(calibrate_a_mult(&[0.0; 4], 0.05).unwrap() > 0.0);
    }

    #[test]
    fn critical_multiplier_is_the_zero_threshold() {
        let k = Kernel::new(1);
        let net = RotationNet::build(0.6).unwrap();
        let s = Model::standard_gaussian(deg(0.0)).sample(300, 8).unwrap();
        let rule = AdaptiveRule::new(k, net, 2.0, 1.0, 1.0).unwrap();
        let c = rule.critical_multiplier(&s, [0.0, 0.0], 0).unwrap();
        assert!(c > 0.0);
        let above = rule.clone().with_a_mult(c * 1.000_001).unwrap().select(&s, [0.0, 0.0]).unwrap();
        assert_eq!(above.r_surface[0][0], 0.0);
        let below = rule.with_a_mult(c * 0.99).unwrap().select(&s, [0.0, 0.0]).unwrap();
        assert!(below.r_surface[0][0] > 0.0);
    }

    #[test]
    fn minimax_huge_multiplier_accepts_first() {
        let k = Kernel::new(2);
        let net = RotationNet::build(0.6).unwrap();
        let m = Model::standard_gaussian(deg(0.0));
        let s = m.sample(400, 5).unwrap();
        let opts = MinimaxOptions {
            b_mult: 1e6,
            ..MinimaxOptions::default()
        };
        let r = minimax_select(&s, [0.0, 0.0], &net, &k, 2.0, 1.0, opts).unwrap();
        assert_eq!(r.stages.len(), 1);
        let st = &r.stages[0];
        assert!(st.r_values.iter().all(|&v| v == 0.0));
        assert_eq!(st.q_index, 0);
        assert!(st.accepted);
        assert_eq!(r.estimate, st.stage_estimate);
        assert_eq!(st.chunk, (100, 400));
        assert!(minimax_select(&s.slice(0, 100), [0.0, 0.0], &net, &k, 2.0, 1.0, opts).is_err());
    }

    #[test]
    fn minimax_falls_back_when_rejected() {
        let k = Kernel::new(2);
        let net = RotationNet::build(0.6).unwrap();
        let s = Model::standard_gaussian(deg(0.0)).sample(400, 5).unwrap();
        let opts = MinimaxOptions {
            b_mult: 1e-30,
            ..MinimaxOptions::default()
        };
        let r = minimax_select(&s, [0.0, 0.0], &net, &k, 2.0, 1.0, opts).unwrap();
        let st = &r.stages[0];
        if !st.accepted {
            assert_eq!(r.estimate, r.stage0.estimate);
            assert_eq!(r.h_hat, r.stage0.h_hat);
        }
        assert!(st.r_values.iter().any(|&v| v > 0.0));
    }
}
