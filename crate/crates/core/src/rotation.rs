//! Plane rotations, the overlap coefficients between two rotations, the
//! pseudo-metric built from them, and separated nets of rotations.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Relaxation constant of the triangle inequality satisfied by [`rho`].
pub const INFRAMETRIC_CONSTANT: f64 = 2.0 * SQRT_2;

/// Tolerance for treating two canonical angles as the same rotation.
pub const ANGLE_EQ_TOL: f64 = 1e-12;

/// `Q = ((q1, -q2), (q2, q1))`, with columns `q = (q1, q2)` and `q_perp = (-q2, q1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    theta: f64,
    q1: f64,
    q2: f64,
}

impl Rotation {
    pub fn from_angle(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("theta", format!("must be finite, got {theta}")));
        }
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        let (q2, q1) = theta.sin_cos();
        Ok(Rotation { theta, q1, q2 })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::from_angle(deg.to_radians())
    }

    pub fn identity() -> Self {
        Rotation {
            theta: 0.0,
            q1: 1.0,
            q2: 0.0,
        }
    }

    /// Canonical angle in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    /// First column `q`.
    pub fn col(&self) -> Point {
        [self.q1, self.q2]
    }

    /// Second column `q_perp`.
    pub fn col_perp(&self) -> Point {
        [-self.q2, self.q1]
    }

    /// `Q x`.
    pub fn apply(&self, x: Point) -> Point {
        [
            self.q1 * x[0] - self.q2 * x[1],
            self.q2 * x[0] + self.q1 * x[1],
        ]
    }

    /// `Qᵀ x`.
    pub fn apply_transpose(&self, x: Point) -> Point {
        [
            self.q1 * x[0] + self.q2 * x[1],
            -self.q2 * x[0] + self.q1 * x[1],
        ]
    }

    /// Composition `self * other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation::from_angle(self.theta + other.theta).expect("finite angles compose")
    }

    /// Same rotation up to [`ANGLE_EQ_TOL`] on the circle.
    pub fn same_as(&self, other: &Rotation) -> bool {
        let d = (self.theta - other.theta).abs();
        d.min(TAU - d) <= ANGLE_EQ_TOL
    }

    /// Same rotation modulo quarter turns, to within `tol` radians.
    pub fn same_mod_quarter_turn(&self, other: &Rotation, tol: f64) -> bool {
        let d = (self.theta - other.theta).rem_euclid(FRAC_PI_2);
        d.min(FRAC_PI_2 - d) <= tol
    }
}

/// Overlap coefficients `(p1, p2) = (qᵀ d_perp, qᵀ d)` of the rotation pair `(D, Q)`.
pub fn overlap_coeffs(d: &Rotation, q: &Rotation) -> (f64, f64) {
    let dp = d.col_perp();
    let dd = d.col();
    let p1 = q.q1 * dp[0] + q.q2 * dp[1];
    let p2 = q.q1 * dd[0] + q.q2 * dd[1];
    (p1, p2)
}

/// `ϱ(a, b) = min(|p1(b, a)|, |p2(a, b)|)`; symmetric, values in `[0, √2/2]`.
pub fn rho(a: &Rotation, b: &Rotation) -> f64 {
    let (p1, _) = overlap_coeffs(b, a);
    let (_, p2) = overlap_coeffs(a, b);
    p1.abs().min(p2.abs())
}

/// True iff `ϱ(Q1, Q3) <= 2√2 [ϱ(Q1, Q2) + ϱ(Q2, Q3)]` for every ordered triple.
pub fn pseudo_inframetric_check(points: &[Rotation]) -> Result<bool> {
    if points.len() < 3 {
        return Err(Error::invalid(
            "points",
            format!("need at least 3 rotations, got {}", points.len()),
        ));
    }
    let n = points.len();
    let table: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rho(&points[i], &points[j])).collect())
        .collect();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // Small additive slack absorbs rounding when both sides vanish.
                if table[i][k] > INFRAMETRIC_CONSTANT * (table[i][j] + table[j][k]) + 1e-12 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// A δ-separated set of rotations, ordered by ascending angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationNet {
    delta: f64,
    members: Vec<Rotation>,
}

impl RotationNet {
    /// Uniform grid on `[0, π/2)` with spacing `π/(2k)`, `k = max(1, ⌊π / (2 arcsin δ)⌋)`.
    pub fn build(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let mut k = if delta > SQRT_2 / 2.0 {
            1
        } else {
            ((PI / (2.0 * delta.asin())).floor() as usize).max(1)
        };
        // Guard the floor against rounding at exact spacing boundaries.
        while k > 1 && (FRAC_PI_2 / k as f64).sin() < delta {
            k -= 1;
        }
        let members = (0..k)
            .map(|j| Rotation::from_angle(FRAC_PI_2 * j as f64 / k as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(RotationNet { delta, members })
    }

    /// Validate a user-supplied member list against the separation invariant.
    pub fn from_members(delta: f64, members: Vec<Rotation>) -> Result<Self> {
        check_delta(delta)?;
        if members.is_empty() {
            return Err(Error::invalid("members", "net must be nonempty"));
        }
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let r = rho(&members[i], &members[j]);
                if r < delta {
                    return Err(Error::invalid(
                        "members",
                        format!("members {i} and {j} have separation {r} < {delta}"),
                    ));
                }
            }
        }
        Ok(RotationNet { delta, members })
    }

    pub fn singleton(q: Rotation) -> Self {
        RotationNet {
            delta: 0.5,
            members: vec![q],
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn members(&self) -> &[Rotation] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `ln(card)`.
    pub fn capacity(&self) -> f64 {
        (self.members.len() as f64).ln()
    }

    /// Smallest pairwise separation, or `None` for a singleton.
    pub fn min_separation(&self) -> Option<f64> {
        let m = &self.members;
        let mut best: Option<f64> = None;
        for i in 0..m.len() {
            for j in (i + 1)..m.len() {
                let r = rho(&m[i], &m[j]);
                best = Some(best.map_or(r, |b| b.min(r)));
            }
        }
        best
    }

    /// Index of the member matching `q` modulo quarter turns, if any.
    pub fn position_mod_quarter_turn(&self, q: &Rotation, tol: f64) -> Option<usize> {
        self.members
            .iter()
            .position(|m| m.same_mod_quarter_turn(q, tol))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(d: f64) -> Rotation {
        Rotation::from_degrees(d).unwrap()
    }

    #[test]
    fn angle_construction() {
        let id = Rotation::from_angle(0.0).unwrap();
        assert_eq!((id.q1(), id.q2()), (1.0, 0.0));
        let quarter = Rotation::from_angle(FRAC_PI_2).unwrap();
        assert!(quarter.q1().abs() < 1e-15 && (quarter.q2() - 1.0).abs() < 1e-15);
        let a = Rotation::from_angle(TAU + 0.3).unwrap();
        let b = Rotation::from_angle(0.3).unwrap();
        assert!((a.q1() - b.q1()).abs() < 1e-12 && (a.q2() - b.q2()).abs() < 1e-12);
        assert!(Rotation::from_angle(f64::NAN).is_err());
        assert!(Rotation::from_angle(f64::INFINITY).is_err());
        let neg = Rotation::from_angle(-0.1).unwrap();
        assert!(neg.theta() >= 0.0 && neg.theta() < TAU);
    }

    #[test]
    fn overlap_examples() {
        let q = deg(30.0);
        assert_eq!(overlap_coeffs(&q, &q).0.abs(), 0.0);
        assert!((overlap_coeffs(&q, &q).1 - 1.0).abs() < 1e-15);

        let (p1, p2) = overlap_coeffs(&deg(0.0), &deg(30.0));
        assert!((p1 - 0.5).abs() < 1e-12);
        assert!((p2 - 3f64.sqrt() / 2.0).abs() < 1e-12);
        let (s1, s2) = overlap_coeffs(&deg(30.0), &deg(0.0));
        assert!((s1 + p1).abs() < 1e-15 && (s2 - p2).abs() < 1e-15);

        let (p1, p2) = overlap_coeffs(&deg(0.0), &deg(90.0));
        assert!((p1 - 1.0).abs() < 1e-15 && p2.abs() < 1e-15);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(&deg(17.0), &deg(17.0)), 0.0);
        assert!((rho(&deg(0.0), &deg(45.0)) - SQRT_2 / 2.0).abs() < 1e-12);
        assert!(rho(&deg(0.0), &deg(90.0)) < 1e-15);
    }

    #[test]
    fn net_examples() {
        let net = RotationNet::build(0.8).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.capacity(), 0.0);

        let net = RotationNet::build(0.1).unwrap();
        assert_eq!(net.len(), 15);
        assert!((net.capacity() - 15f64.ln()).abs() < 1e-15);
        assert!(net.min_separation().unwrap() >= 0.1);

        let net = RotationNet::build(0.7).unwrap();
        assert_eq!(net.len(), 2);

        for bad in [0.0, 1.0, 1.5, -0.2, f64::NAN] {
            assert!(RotationNet::build(bad).is_err());
        }
    }

    #[test]
    fn net_is_maximal_among_uniform_grids() {
        for delta in [0.3, 0.1, 0.03, 0.01, 0.5, 0.7] {
            let k = RotationNet::build(delta).unwrap().len();
            let denser = k + 1;
            let sep = (FRAC_PI_2 / denser as f64).sin();
            assert!(sep < delta, "delta={delta}: k+1 grid still separated");
        }
    }

    #[test]
    fn user_members_are_validated() {
        assert!(RotationNet::from_members(0.5, vec![deg(0.0), deg(45.0)]).is_ok());
        assert!(RotationNet::from_members(0.5, vec![deg(0.0), deg(10.0)]).is_err());
        assert!(RotationNet::from_members(0.5, vec![]).is_err());
    }

    #[test]
    fn inframetric_examples() {
        assert!(pseudo_inframetric_check(&[deg(0.0), deg(45.0), deg(90.0)]).unwrap());
        assert!(pseudo_inframetric_check(RotationNet::build(0.1).unwrap().members()).unwrap());
        assert!(pseudo_inframetric_check(&[deg(0.0), deg(1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn rho_symmetric_bounded_periodic(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let (ra, rb) = (Rotation::from_angle(a).unwrap(), Rotation::from_angle(b).unwrap());
            let r = rho(&ra, &rb);
            prop_assert!((r - rho(&rb, &ra)).abs() < 1e-15);
            prop_assert!((0.0..=SQRT_2 / 2.0 + 1e-15).contains(&r));
            let shifted = rho(
                &Rotation::from_angle(a + c).unwrap(),
                &Rotation::from_angle(b + c).unwrap(),
            );
            prop_assert!((r - shifted).abs() < 1e-9);
            let quarter = rho(&ra, &Rotation::from_angle(b + FRAC_PI_2).unwrap());
            prop_assert!((r - quarter).abs() < 1e-9);
        }

        #[test]
        fn overlap_unit_norm(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (p1, p2) = overlap_coeffs(&Rotation::from_angle(a).unwrap(), &Rotation::from_angle(b).unwrap());
            prop_assert!((p1 * p1 + p2 * p2 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn random_triples_satisfy_inframetric(a in 0.0f64..7.0, b in 0.0f64..7.0, c in 0.0f64..7.0) {
            let pts = [Rotation::from_angle(a).unwrap(), Rotation::from_angle(b).unwrap(), Rotation::from_angle(c).unwrap()];
            prop_assert!(pseudo_inframetric_check(&pts).unwrap());
        }
    }
}
