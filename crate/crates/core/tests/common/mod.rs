//! Reference computations shared by the integration tests. Nothing here calls
//! the library's own quadrature, so agreement is evidence of correctness.
#![allow(dead_code)]

use structkde::{Kernel, Model, Rotation};

pub type Point = [f64; 2];

/// Double-exponential quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}

/// Sum of [`integrate`] over consecutive breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], tol))
        .sum()
}

/// Iterated [`integrate_pieces`] over a tensor grid of breakpoints.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, b1: &[f64], b2: &[f64], tol: f64) -> f64 {
    integrate_pieces(|u| integrate_pieces(|v| f(u, v), b2, tol), b1, tol)
}

/// Breakpoints of `|K|` on `[-1, 1]`, found by bisection on a fine scan.
pub fn kernel_breaks(k: &Kernel) -> Vec<f64> {
    let mut b = vec![-1.0];
    let m = 4000;
    for i in 0..m {
        let (mut lo, mut hi) = (-1.0 + 2.0 * i as f64 / m as f64, -1.0 + 2.0 * (i + 1) as f64 / m as f64);
        if (k.eval(lo) > 0.0) != (k.eval(hi) > 0.0) && hi < 1.0 {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (k.eval(mid) > 0.0) == (k.eval(lo) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            b.push(0.5 * (lo + hi));
        }
    }
    b.push(1.0);
    b
}

pub fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Density of a centred bivariate normal with covariance `[[a, c], [c, b]]`.
pub fn bivariate_pdf(z: Point, cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[0][1];
    let q = (cov[1][1] * z[0] * z[0] - 2.0 * cov[0][1] * z[0] * z[1] + cov[0][0] * z[1] * z[1]) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Rotation matrix by `theta` radians as rows.
pub fn rot(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

pub fn mat_vec(m: [[f64; 2]; 2], v: Point) -> Point {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// A Gaussian model with independent scales `(s1, s2)` along the columns of
/// the rotation by `theta` radians, described explicitly.
#[derive(Debug, Clone, Copy)]
pub struct GaussSpec {
    pub s1: f64,
    pub s2: f64,
    pub theta: f64,
}

impl GaussSpec {
    pub fn model(&self) -> Model {
        Model::new(
            structkde::Marginal::gaussian(self.s1).unwrap(),
            structkde::Marginal::gaussian(self.s2).unwrap(),
            Rotation::from_angle(self.theta).unwrap(),
            2.0,
            1.0,
        )
        .unwrap()
    }

    /// Covariance `Q diag(s1², s2²) Qᵀ`.
    pub fn cov(&self) -> [[f64; 2]; 2] {
        let q = rot(self.theta);
        let v = [self.s1 * self.s1, self.s2 * self.s2];
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = q[i][0] * q[j][0] * v[0] + q[i][1] * q[j][1] * v[1];
            }
        }
        c
    }

    pub fn density(&self, x: Point) -> f64 {
        bivariate_pdf(x, self.cov())
    }

    /// Variance of `bᵀX`.
    pub fn projected_var(&self, b: Point) -> f64 {
        let c = self.cov();
        let cb = mat_vec(c, b);
        dot(b, cb)
    }

    /// `E[n⁻¹ Σ K_h(bᵀ(X_k - x))] = ∫ K(u) φ(bᵀx + h u) du`.
    pub fn expected_directional(&self, k: &Kernel, x: Point, h: f64, b: Point) -> f64 {
        let var = self.projected_var(b);
        let t = dot(b, x);
        integrate_pieces(|u| k.eval(u) * normal_pdf(t + h * u, var), &kernel_breaks(k), 1e-13)
    }

    /// Expectation of the product estimator along the rotation by `d` radians.
    pub fn expected_product(&self, k: &Kernel, x: Point, h: f64, d: f64) -> f64 {
        let (s, c) = d.sin_cos();
        self.expected_directional(k, x, h, [c, s]) * self.expected_directional(k, x, h, [-s, c])
    }

    /// Expectation of one U-statistic summand for rotations `d`, `q` (radians).
    ///
    /// The kernel arguments form `Z = p1 J X_k + p2 X_l - c` with independent
    /// `X_k, X_l`, where `J(y) = (-y2, y1)`; `Z` is Gaussian, so the 4-D
    /// expectation collapses to `∬ K(u1) K(u2) φ_Z(h u) du`.
    pub fn expected_pair(&self, k: &Kernel, x: Point, h: f64, d: f64, q: f64) -> f64 {
        let (ds, dc) = d.sin_cos();
        let (qs, qc) = q.sin_cos();
        let p1 = qc * -ds + qs * dc;
        let p2 = qc * dc + qs * ds;
        // c = Ω Γ Q D Ω x with Ω = swap and Γ = diag(1, -1).
        let y = mat_vec(rot(q), mat_vec(rot(d), [x[1], x[0]]));
        let c = [-y[1], y[0]];
        let s = self.cov();
        // J S Jᵀ for J = [[0, -1], [1, 0]].
        let jsj = [[s[1][1], -s[0][1]], [-s[0][1], s[0][0]]];
        let mut cov = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] = p1 * p1 * jsj[i][j] + p2 * p2 * s[i][j];
            }
        }
        let br = kernel_breaks(k);
        integrate_2d(
            |u1, u2| k.eval(u1) * k.eval(u2) * bivariate_pdf([h * u1 + c[0], h * u2 + c[1]], cov),
            &br,
            &br,
            1e-11,
        )
    }

    /// `τ_f(D) = ∬ g(p1 Γ u) g(p1⁻¹ D Ω x + p2 Ω Γ u) du` evaluated directly,
    /// with `g` the product of the two centred normal marginals.
    pub fn tau(&self, d: f64, x: Point) -> f64 {
        let (ds, dc) = d.sin_cos();
        let (qs, qc) = self.theta.sin_cos();
        let p1 = qc * -ds + qs * dc;
        let p2 = qc * dc + qs * ds;
        let g = |y: Point| normal_pdf(y[0], self.s1 * self.s1) * normal_pdf(y[1], self.s2 * self.s2);
        let dx = mat_vec(rot(d), [x[1], x[0]]);
        let r = 12.0 * self.s1.max(self.s2) / p1.abs();
        integrate_2d(
            |u1, u2| g([p1 * u1, -p1 * u2]) * g([dx[0] / p1 - p2 * u2, dx[1] / p1 + p2 * u1]),
            &[-r, 0.0, r],
            &[-r, 0.0, r],
            1e-12,
        )
    }
}
