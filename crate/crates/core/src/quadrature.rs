//! Globally adaptive Gauss–Kronrod (7/15) integration in one and two dimensions.
//!
//! The 1-D driver keeps a heap of subintervals and always bisects the one with
//! the largest error estimate until the summed estimate drops below the
//! requested absolute tolerance. Integrands with kinks should be split at the
//! kink by the caller (see [`integrate_pieces`]); the scheme converges there
//! too, only more slowly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Hard cap on the number of subintervals per 1-D integral.
pub const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &node) in XGK.iter().take(7).enumerate() {
        let dx = half * node;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    // Floor the estimate at a few ulps of the value so that smooth integrands
    // terminate instead of chasing rounding noise.
    let floor = 50.0 * f64::EPSILON * value.abs();
    Estimate {
        value,
        error: error.max(floor),
    }
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let first = gk15(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, est: first });
    while error > tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNotConverged {
                tolerance: tol,
                estimate: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to adjacent floats; nothing left to refine.
            return Err(Error::QuadratureNotConverged {
                tolerance: tol,
                estimate: error,
            });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            est: right,
        });
        if error <= tol {
            // Resum to shed the drift accumulated by the running updates.
            value = heap.iter().map(|p| p.est.value).sum();
            error = heap.iter().map(|p| p.est.error).sum();
        }
    }
    Ok(Estimate { value, error })
}

/// Integrate over consecutive pieces `[b0,b1], [b1,b2], ...`, splitting the
/// tolerance in proportion to piece length.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<Estimate> {
    if breaks.len() < 2 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let span = breaks[breaks.len() - 1] - breaks[0];
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
    };
    for w in breaks.windows(2) {
        let share = if span > 0.0 {
            tol * (w[1] - w[0]) / span
        } else {
            tol
        };
        let e = integrate(&f, w[0], w[1], share)?;
        total.value += e.value;
        total.error += e.error;
    }
    Ok(total)
}

/// Nested 2-D integral of `f(x, y)` over a product of piecewise ranges.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x_breaks: &[f64],
    y_breaks: &[f64],
    tol: f64,
) -> Result<Estimate> {
    let x_span = x_breaks[x_breaks.len() - 1] - x_breaks[0];
    let inner_tol = 0.1 * tol / x_span.max(1.0);
    let failure = std::cell::Cell::new(None);
    let outer = integrate_pieces(
        |x| match integrate_pieces(|y| f(x, y), y_breaks, inner_tol) {
            Ok(e) => e.value,
            Err(err) => {
                failure.set(Some(err));
                0.0
            }
        },
        x_breaks,
        0.9 * tol,
    )?;
    if let Some(err) = failure.take() {
        return Err(err);
    }
    Ok(outer)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` via Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = order as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}
