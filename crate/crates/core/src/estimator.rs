//! Kernel estimators indexed by bandwidth and rotation.
//!
//! * [`directional_kde`]: 1-D kernel estimate of the law of `bᵀX` at `bᵀx`.
//! * [`product_estimate`]: product of the directional estimates along the two
//!   columns of a rotation.
//! * [`auxiliary_estimate`]: order-2 U-statistic pairing two rotations,
//!   computed either by the full double loop or through a [`PairIndex`] that
//!   only visits pairs inside the kernel support.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::Sample;
use crate::rotation::{overlap_coeffs, Point, Rotation};

/// Smallest sample size for which bandwidth grids are built.
pub const MIN_GRID_N: usize = 16;

/// Relative widening of pruning windows so rounding never drops a pair the
/// naive loop would count.
const WINDOW_SLACK: f64 = 1e-9;

/// The geometric grid `{e^-k : k = 0..=⌊ln n⌋}` and its restriction to
/// `[(ln n)² / n, 1 / ln ln n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid {
    n: usize,
    values: Vec<f64>,
    restricted: Vec<f64>,
}

impl BandwidthGrid {
    /// Fails for `n < 16` and whenever the restricted grid is empty (`n <= 33`).
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_GRID_N {
            return Err(Error::SampleTooSmall {
                n,
                reason: format!("bandwidth grids need n >= {MIN_GRID_N}"),
            });
        }
        let ln_n = (n as f64).ln();
        let kmax = ln_n.floor() as i32;
        let values: Vec<f64> = (0..=kmax).map(|k| (-f64::from(k)).exp()).collect();
        let upper = 1.0 / ln_n.ln();
        let lower = ln_n * ln_n / n as f64;
        let restricted: Vec<f64> = values
            .iter()
            .copied()
            .filter(|&h| h <= upper && h >= lower)
            .collect();
        if restricted.is_empty() {
            return Err(Error::SampleTooSmall {
                n,
                reason: format!(
                    "restricted bandwidth grid [{lower:.4}, {upper:.4}] contains no e^-k"
                ),
            });
        }
        Ok(BandwidthGrid {
            n,
            values,
            restricted,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Strictly decreasing.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strictly decreasing subset of [`values`](Self::values).
    pub fn restricted(&self) -> &[f64] {
        &self.restricted
    }
}

/// U-statistic evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UStatMode {
    /// Every ordered pair `k != l`.
    Naive,
    /// Range queries on coordinate-sorted copies of the sample.
    #[default]
    Pruned,
}

impl std::str::FromStr for UStatMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(UStatMode::Naive),
            "pruned" => Ok(UStatMode::Pruned),
            other => Err(Error::invalid("mode", format!("expected naive|pruned, got {other}"))),
        }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    Ok(())
}

fn directional_unchecked(kernel: &Kernel, points: &[Point], x: Point, h: f64, b: Point) -> f64 {
    let bx = b[0] * x[0] + b[1] * x[1];
    let s: f64 = points
        .iter()
        .map(|p| kernel.eval((b[0] * p[0] + b[1] * p[1] - bx) / h))
        .sum();
    s / (h * points.len() as f64)
}

/// `n⁻¹ Σ K_h(bᵀ(X_k - x))` for a unit vector `b`.
pub fn directional_kde(kernel: &Kernel, sample: &Sample, x: Point, h: f64, b: Point) -> Result<f64> {
    check_bandwidth(h)?;
    let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("b", format!("must be a unit vector, |b| = {norm}")));
    }
    Ok(directional_unchecked(kernel, &sample.points, x, h, b))
}

/// `f̃_{h,D}(x)`: product of the directional estimates along `d` and `d_perp`.
pub fn product_estimate(kernel: &Kernel, sample: &Sample, x: Point, h: f64, d: &Rotation) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(product_unchecked(kernel, &sample.points, x, h, d))
}

pub(crate) fn product_unchecked(kernel: &Kernel, points: &[Point], x: Point, h: f64, d: &Rotation) -> f64 {
    directional_unchecked(kernel, points, x, h, d.col())
        * directional_unchecked(kernel, points, x, h, d.col_perp())
}

/// Geometry of one `(D, Q)` U-statistic at a query point.
#[derive(Debug, Clone, Copy)]
struct PairGeometry {
    p1: f64,
    p2: f64,
    /// `ΩΓ Q D Ω x`.
    center: Point,
}

impl PairGeometry {
    fn new(d: &Rotation, q: &Rotation, x: Point) -> Self {
        let (p1, p2) = overlap_coeffs(d, q);
        // Ω x = (x2, x1); Ω Γ y = (-y2, y1).
        let y = q.apply(d.apply([x[1], x[0]]));
        PairGeometry {
            p1,
            p2,
            center: [-y[1], y[0]],
        }
    }

    /// Arguments of the two kernel factors for the ordered pair `(X_k, X_l)`.
    #[inline]
    fn args(&self, xk: Point, xl: Point) -> (f64, f64) {
        (
            -self.p1 * xk[1] + self.p2 * xl[0] - self.center[0],
            self.p1 * xk[0] + self.p2 * xl[1] - self.center[1],
        )
    }

    #[inline]
    fn term(&self, kernel: &Kernel, h: f64, xk: Point, xl: Point) -> f64 {
        let (a, b) = self.args(xk, xl);
        let ka = kernel.eval(a / h);
        if ka == 0.0 {
            return 0.0;
        }
        ka * kernel.eval(b / h)
    }
}

fn naive_sum(kernel: &Kernel, points: &[Point], h: f64, g: &PairGeometry) -> f64 {
    let mut acc = Compensated::default();
    for (k, &xk) in points.iter().enumerate() {
        for (l, &xl) in points.iter().enumerate() {
            if k != l {
                acc.add(g.term(kernel, h, xk, xl));
            }
        }
    }
    acc.value()
}

/// Coordinate-sorted copies of a sample for support-restricted pair queries.
#[derive(Debug, Clone)]
pub struct PairIndex {
    points: Vec<Point>,
    /// `(point, original index)` sorted by first coordinate.
    by_first: Vec<(Point, usize)>,
    first_keys: Vec<f64>,
    /// `(point, original index)` sorted by second coordinate.
    by_second: Vec<(Point, usize)>,
    second_keys: Vec<f64>,
}

impl PairIndex {
    pub fn new(sample: &Sample) -> Self {
        Self::from_points(&sample.points)
    }

    pub fn from_points(points: &[Point]) -> Self {
        let mut by_first: Vec<(Point, usize)> = points.iter().copied().zip(0..).collect();
        by_first.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.1.cmp(&b.1)));
        let mut by_second = by_first.clone();
        by_second.sort_by(|a, b| a.0[1].total_cmp(&b.0[1]).then(a.1.cmp(&b.1)));
        PairIndex {
            points: points.to_vec(),
            first_keys: by_first.iter().map(|e| e.0[0]).collect(),
            second_keys: by_second.iter().map(|e| e.0[1]).collect(),
            by_first,
            by_second,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn range(keys: &[f64], lo: f64, hi: f64) -> (usize, usize) {
        let start = keys.partition_point(|&v| v < lo);
        let end = keys.partition_point(|&v| v <= hi);
        (start, end.max(start))
    }

    /// Candidates whose coordinates satisfy both window constraints; the
    /// shorter of the two sorted ranges is returned.
    fn candidates(&self, w1: (f64, f64), w2: (f64, f64)) -> &[(Point, usize)] {
        let (a1, b1) = Self::range(&self.first_keys, w1.0, w1.1);
        let (a2, b2) = Self::range(&self.second_keys, w2.0, w2.1);
        if b1 - a1 <= b2 - a2 {
            &self.by_first[a1..b1]
        } else {
            &self.by_second[a2..b2]
        }
    }

    fn pruned_sum(&self, kernel: &Kernel, h: f64, g: &PairGeometry) -> f64 {
        // Coordinates y with |slope * y - t| <= h, widened for rounding.
        let window = |t: f64, slope: f64| -> (f64, f64) {
            let (u, v) = ((t - h) / slope, (t + h) / slope);
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            let pad = WINDOW_SLACK * (1.0 + lo.abs().max(hi.abs()));
            (lo - pad, hi + pad)
        };
        // Zero terms leave a compensated sum unchanged, so skipping them keeps
        // the result identical to the full double loop.
        let inside = |y: Point, w1: (f64, f64), w2: (f64, f64)| {
            y[0] >= w1.0 && y[0] <= w1.1 && y[1] >= w2.0 && y[1] <= w2.1
        };
        let mut acc = Compensated::default();
        if g.p2.abs() >= g.p1.abs() {
            // Constrain the second argument X_l given X_k.
            for (k, &xk) in self.points.iter().enumerate() {
                let w1 = window(g.center[0] + g.p1 * xk[1], g.p2);
                let w2 = window(g.center[1] - g.p1 * xk[0], g.p2);
                for &(xl, l) in self.candidates(w1, w2) {
                    if l != k && inside(xl, w1, w2) {
                        let v = g.term(kernel, h, xk, xl);
                        if v != 0.0 {
                            acc.add(v);
                        }
                    }
                }
            }
        } else {
            // Constrain the first argument X_k given X_l.
            for (l, &xl) in self.points.iter().enumerate() {
                let s1 = g.p2 * xl[0] - g.center[0];
                let s2 = g.p2 * xl[1] - g.center[1];
                let w2 = window(s1, g.p1);
                let w1 = window(-s2, g.p1);
                for &(xk, k) in self.candidates(w1, w2) {
                    if l != k && inside(xk, w1, w2) {
                        let v = g.term(kernel, h, xk, xl);
                        if v != 0.0 {
                            acc.add(v);
                        }
                    }
                }
            }
        }
        acc.value()
    }

    /// `f̃_{h,(D,Q)}(x)` using this index (pruned mode).
    pub fn auxiliary(&self, kernel: &Kernel, x: Point, h: f64, d: &Rotation, q: &Rotation) -> Result<f64> {
        auxiliary_points(kernel, &self.points, Some(self), x, h, d, q, UStatMode::Pruned)
    }
}

#[allow(clippy::too_many_arguments)]
fn auxiliary_points(
    kernel: &Kernel,
    points: &[Point],
    index: Option<&PairIndex>,
    x: Point,
    h: f64,
    d: &Rotation,
    q: &Rotation,
    mode: UStatMode,
) -> Result<f64> {
    check_bandwidth(h)?;
    if d.same_as(q) {
        return Ok(product_unchecked(kernel, points, x, h, q));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::SampleTooSmall {
            n,
            reason: "the U-statistic needs at least two observations".into(),
        });
    }
    let g = PairGeometry::new(d, q, x);
    let total = match mode {
        UStatMode::Naive => naive_sum(kernel, points, h, &g),
        UStatMode::Pruned => match index {
            Some(ix) => ix.pruned_sum(kernel, h, &g),
            None => PairIndex::from_points(points).pruned_sum(kernel, h, &g),
        },
    };
    Ok(total / (h * h * n as f64 * (n - 1) as f64))
}

/// `f̄_{h,(D,Q)}(x) = (n(n-1))⁻¹ Σ_{k≠l} K_h(p1 ΩΓ X_k + p2 X_l - ΩΓ Q D Ω x)`,
/// falling back to [`product_estimate`] when `D = Q`.
#[allow(clippy::too_many_arguments)]
pub fn auxiliary_estimate(
    kernel: &Kernel,
    sample: &Sample,
    x: Point,
    h: f64,
    d: &Rotation,
    q: &Rotation,
    mode: UStatMode,
) -> Result<f64> {
    auxiliary_points(kernel, &sample.points, None, x, h, d, q, mode)
}

/// `f̃_{h,(D,Q)}(x)`: the product path for `D = Q`, the U-statistic otherwise.
#[allow(clippy::too_many_arguments)]
pub fn combined_estimate(
    kernel: &Kernel,
    sample: &Sample,
    x: Point,
    h: f64,
    d: &Rotation,
    q: &Rotation,
    mode: UStatMode,
) -> Result<f64> {
    if d.same_as(q) {
        product_estimate(kernel, sample, x, h, q)
    } else {
        auxiliary_estimate(kernel, sample, x, h, d, q, mode)
    }
}
