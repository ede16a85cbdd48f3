//! Higher-order polynomial kernels on `[-1, 1]`.
//!
//! A kernel of order floor `m` is the projection of the point evaluation at
//! zero onto polynomials of degree `2m`, written in the orthonormal Legendre
//! basis: `K(u) = sum_{j <= 2m} phi_j(0) phi_j(u)`. By the reproducing
//! property `∫ P(u) K(u) du = P(0)` for every polynomial of degree `<= 2m`, so
//! `∫K = 1` and the moments `1..=2m` vanish.

use crate::error::{Error, Result};
use crate::quadrature;

/// Tolerance used for the moment quadratures in [`Kernel::moment_table`].
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance of each 2-D quadrature inside [`Kernel::capacity_constant`].
pub const CAPACITY_TOLERANCE: f64 = 1e-8;
/// Number of exponent grid points used for the supremum in the capacity constant.
pub const CAPACITY_GRID: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    order_floor: usize,
    /// Monomial coefficients, ascending degree. Odd entries are zero.
    coeffs: Vec<f64>,
    /// Coefficients of `u^(2j)`, used for evaluation in `u^2`.
    even: Vec<f64>,
    sup_norm: f64,
    l1_norm: f64,
    l2_norm_sq: f64,
    /// Sign changes of `K` inside `(-1, 1)`, ascending.
    roots: Vec<f64>,
}

/// One row of the moment verification table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub j: usize,
    pub moment: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Monomial coefficients of the Legendre polynomials `P_0..=P_degree`.
fn legendre_monomials(degree: usize) -> Vec<Vec<f64>> {
    let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
    if degree >= 1 {
        polys.push(vec![0.0, 1.0]);
    }
    for j in 1..degree {
        let mut next = vec![0.0; j + 2];
        for (i, c) in polys[j].iter().enumerate() {
            next[i + 1] += (2 * j + 1) as f64 * c;
        }
        for (i, c) in polys[j - 1].iter().enumerate() {
            next[i] -= j as f64 * c;
        }
        for c in &mut next {
            *c /= (j + 1) as f64;
        }
        polys.push(next);
    }
    polys
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Roots of a polynomial inside `(a, b)` found by dense sign scanning plus bisection.
fn interior_roots(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    const SCAN: usize = 20_000;
    let mut roots = Vec::new();
    let step = (b - a) / SCAN as f64;
    let mut lo = a;
    let mut f_lo = horner(coeffs, lo);
    for i in 1..=SCAN {
        let hi = a + step * i as f64;
        let f_hi = horner(coeffs, hi);
        if f_lo == 0.0 && lo > a {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            let (mut l, mut h, mut fl) = (lo, hi, f_lo);
            for _ in 0..200 {
                let m = 0.5 * (l + h);
                if m <= l || m >= h {
                    break;
                }
                let fm = horner(coeffs, m);
                if fm == 0.0 {
                    l = m;
                    h = m;
                    break;
                }
                if fl * fm < 0.0 {
                    h = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            roots.push(0.5 * (l + h));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots
}

impl Kernel {
    /// Legendre-expansion kernel with `2 * order_floor` vanishing moments.
    pub fn new(order_floor: usize) -> Self {
        let degree = 2 * order_floor;
        let legendre = legendre_monomials(degree);
        let mut coeffs = vec![0.0; degree + 1];
        for (j, p) in legendre.iter().enumerate().step_by(2) {
            let weight = (2 * j + 1) as f64 / 2.0 * p[0];
            for (i, c) in p.iter().enumerate() {
                coeffs[i] += weight * c;
            }
        }
        let even: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
        let roots = interior_roots(&coeffs, -1.0, 1.0);

        let derivative: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        let mut candidates = interior_roots(&derivative, -1.0, 1.0);
        candidates.extend([-1.0, 0.0, 1.0]);
        let sup_norm = candidates
            .iter()
            .map(|&u| horner(&coeffs, u).abs())
            .fold(0.0, f64::max);

        let mut breaks = vec![-1.0];
        breaks.extend(&roots);
        breaks.push(1.0);
        let l1_norm = quadrature::integrate_pieces(|u| horner(&coeffs, u).abs(), &breaks, 1e-13)
            .map(|e| e.value)
            .expect("polynomial pieces integrate");

        let mut l2_norm_sq = 0.0;
        for (i, a) in coeffs.iter().enumerate() {
            for (j, b) in coeffs.iter().enumerate() {
                if (i + j) % 2 == 0 {
                    l2_norm_sq += a * b * 2.0 / (i + j + 1) as f64;
                }
            }
        }

        Kernel {
            order_floor,
            coeffs,
            even,
            sup_norm,
            l1_norm,
            l2_norm_sq,
            roots,
        }
    }

    pub fn order_floor(&self) -> usize {
        self.order_floor
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Support half-width; always 1.
    pub fn support(&self) -> f64 {
        1.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// Breakpoints `[-1, roots..., 1]` where `|K|` has kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![-1.0];
        b.extend(&self.roots);
        b.push(1.0);
        b
    }

    /// `K(u)`; exactly zero outside `[-1, 1]`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        let u2 = u * u;
        self.even.iter().rev().fold(0.0, |acc, c| acc * u2 + c)
    }

    /// Scaled kernel `K_h(t) = K(t / h) / h`.
    #[inline]
    pub fn eval_scaled(&self, t: f64, h: f64) -> f64 {
        self.eval(t / h) / h
    }

    /// `∫ u^j K(u) du` by adaptive quadrature.
    pub fn moment(&self, j: usize, tol: f64) -> Result<f64> {
        let e = quadrature::integrate(|u| u.powi(j as i32) * self.eval(u), -1.0, 1.0, tol)?;
        Ok(e.value)
    }

    /// Moments `0..=2m` with their targets (1 for `j = 0`, else 0).
    pub fn moment_table(&self, tol: f64) -> Result<Vec<MomentCheck>> {
        (0..=2 * self.order_floor)
            .map(|j| {
                let moment = self.moment(j, MOMENT_TOLERANCE.min(tol))?;
                let target = if j == 0 { 1.0 } else { 0.0 };
                Ok(MomentCheck {
                    j,
                    moment,
                    target,
                    tolerance: tol,
                    pass: (moment - target).abs() <= tol,
                })
            })
            .collect()
    }

    /// `∬ |K(t1) K(t2)| [s (t1² + t2²)^e + 1]² dt` for one exponent `e`.
    pub fn capacity_integral(&self, exponent: f64, s: f64) -> Result<f64> {
        let mut breaks = self.breakpoints();
        if !breaks.contains(&0.0) {
            breaks.push(0.0);
            breaks.sort_by(f64::total_cmp);
        }
        let e = quadrature::integrate_2d(
            |t1, t2| {
                let r = t1 * t1 + t2 * t2;
                let bracket = s * r.powf(exponent) + 1.0;
                (self.eval(t1) * self.eval(t2)).abs() * bracket * bracket
            },
            &breaks,
            &breaks,
            CAPACITY_TOLERANCE,
        )?;
        Ok(e.value)
    }

    /// The constant `C(K, b, s) = sup_{b' <= b} ∬ |K(t1)K(t2)| [s(t1²+t2²)^b' + 1]² dt`.
    ///
    /// The supremum is taken over the exponents `b/32, 2b/32, ..., b` together
    /// with the limit `b' -> 0+`, whose value is `(s + 1)² ‖K‖₁²` in closed form.
    /// The integrand is convex in `b'`, so the supremum over `(0, b]` is
    /// attained at one of the two ends; both are part of the candidate set.
    pub fn capacity_constant(&self, b: f64, s: f64) -> Result<f64> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("must be positive, got {b}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("s", format!("must be positive, got {s}")));
        }
        let mut best = (s + 1.0).powi(2) * self.l1_norm * self.l1_norm;
        for i in 1..=CAPACITY_GRID {
            let exponent = b * i as f64 / CAPACITY_GRID as f64;
            best = best.max(self.capacity_integral(exponent, s)?);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_is_uniform() {
        let k = Kernel::new(0);
        assert_eq!(k.coeffs(), &[0.5]);
        assert_eq!(k.eval(0.3), 0.5);
        assert_eq!(k.eval(-1.0), 0.5);
        assert_eq!(k.eval(1.0 + 1e-15), 0.0);
        assert!((k.l1_norm() - 1.0).abs() < 1e-13);
        assert!((k.l2_norm_sq() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_one_closed_form() {
        let k = Kernel::new(1);
        assert!((k.coeffs()[0] - 9.0 / 8.0).abs() < 1e-15);
        assert_eq!(k.coeffs()[1], 0.0);
        assert!((k.coeffs()[2] + 15.0 / 8.0).abs() < 1e-15);
        assert!((k.eval(0.0) - 1.125).abs() < 1e-15);
        assert!((k.eval(1.0) + 0.75).abs() < 1e-15);
        assert_eq!(k.eval(2.0), 0.0);
        assert_eq!(k.eval(-2.0), 0.0);
        // root at sqrt(3/5)
        assert_eq!(k.roots.len(), 2);
        assert!((k.roots[1] - 0.6f64.sqrt()).abs() < 1e-12);
        assert!((k.sup_norm() - 1.125).abs() < 1e-15);
    }

    #[test]
    fn order_one_norms_match_hand_values() {
        let k = Kernel::new(1);
        // ∫|K| = 2[ (9/8)r - (5/8)r^3 ] * 2 - 2[(9/8) - (5/8)] with r = sqrt(3/5)
        let r = 0.6f64.sqrt();
        let pos = 2.0 * (9.0 / 8.0 * r - 5.0 / 8.0 * r.powi(3));
        let total = 2.0 * (9.0 / 8.0 - 5.0 / 8.0);
        let l1 = pos + (pos - total);
        assert!((k.l1_norm() - l1).abs() < 1e-12);
        // ∫K² = 2 ∫_0^1 (81/64 - 135/32 u² + 225/64 u^4) du
        let l2 = 2.0 * (81.0 / 64.0 - 135.0 / 96.0 + 225.0 / 320.0);
        assert!((k.l2_norm_sq() - l2).abs() < 1e-14);
    }

    #[test]
    fn kernels_are_even() {
        for m in 0..5 {
            let k = Kernel::new(m);
            for i in 0..=100 {
                let u = i as f64 / 100.0;
                assert_eq!(k.eval(u), k.eval(-u));
            }
        }
    }

    #[test]
    fn moments_vanish() {
        for m in 0..5 {
            let k = Kernel::new(m);
            for row in k.moment_table(1e-8).unwrap() {
                assert!(row.pass, "m={m} j={} moment={}", row.j, row.moment);
            }
        }
    }

    #[test]
    fn capacity_small_s_tends_to_l1_squared() {
        let k = Kernel::new(1);
        let c = k.capacity_constant(1.0, 1e-9).unwrap();
        assert!((c - k.l1_norm().powi(2)).abs() < 1e-7);
    }

    #[test]
    fn capacity_rejects_bad_arguments() {
        let k = Kernel::new(1);
        assert!(k.capacity_constant(0.0, 1.0).is_err());
        assert!(k.capacity_constant(1.0, -1.0).is_err());
    }

    #[test]
    fn capacity_is_monotone_in_s_and_b() {
        let k = Kernel::new(1);
        let c1 = k.capacity_constant(1.0, 1.0).unwrap();
        let c2 = k.capacity_constant(1.0, 2.0).unwrap();
        assert!(c2 >= c1);
        let mut last = 0.0;
        for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let c = k.capacity_constant(b, 1.0).unwrap();
            assert!(c >= last - 1e-9, "b={b}: {c} < {last}");
            assert!(c >= k.l1_norm().powi(2));
            last = c;
        }
    }
}
