//! Library quantities against independently computed references.

mod common;

use common::*;
use rand::SeedableRng;
use structkde::estimator::{auxiliary_estimate, directional_kde, product_estimate, UStatMode};
use structkde::{Kernel, Marginal, Model, Rotation};

#[test]
fn kernel_moments_match_reference_quadrature() {
    for order in 0..=4 {
        let k = Kernel::new(order);
        let br = kernel_breaks(&k);
        for j in 0..=2 * order + 1 {
            let reference = integrate_pieces(|u| u.powi(j as i32) * k.eval(u), &br, 1e-14);
            let target = if j == 0 { 1.0 } else { 0.0 };
            if j <= 2 * order {
                assert!((reference - target).abs() < 1e-10, "order {order} moment {j}: {reference}");
            }
            assert!((k.moment(j, 1e-12).unwrap() - reference).abs() < 1e-10);
        }
    }
}

#[test]
fn kernel_norms_match_reference() {
    for order in 1..=3 {
        let k = Kernel::new(order);
        let br = kernel_breaks(&k);
        let l1 = integrate_pieces(|u| k.eval(u).abs(), &br, 1e-14);
        let l2 = integrate_pieces(|u| k.eval(u).powi(2), &br, 1e-14);
        let sup = (0..=200_000)
            .map(|i| k.eval(-1.0 + 2.0 * i as f64 / 200_000.0).abs())
            .fold(0.0, f64::max);
        assert!((k.l1_norm() - l1).abs() < 1e-10, "order {order}");
        assert!((k.l2_norm_sq() - l2).abs() < 1e-12, "order {order}");
        assert!(k.sup_norm() >= sup && k.sup_norm() - sup < 1e-8, "order {order}");
    }
}

#[test]
fn capacity_integral_matches_reference() {
    for order in [1, 2] {
        let k = Kernel::new(order);
        let mut br = kernel_breaks(&k);
        br.push(0.0);
        br.sort_by(f64::total_cmp);
        for (e, s) in [(0.25, 1.0), (1.0, 1.0), (2.0, 2f64.sqrt()), (0.5, 2f64.sqrt())] {
            let reference = integrate_2d(
                |a, b| {
                    let bracket = s * (a * a + b * b).powf(e) + 1.0;
                    (k.eval(a) * k.eval(b)).abs() * bracket * bracket
                },
                &br,
                &br,
                1e-11,
            );
            let got = k.capacity_integral(e, s).unwrap();
            assert!((got - reference).abs() < 1e-7 * reference, "order {order} e {e}: {got} vs {reference}");
        }
    }
}

#[test]
fn capacity_constant_is_the_sup_over_exponents() {
    let k = Kernel::new(1);
    let c = k.capacity_constant(2.0, 2f64.sqrt()).unwrap();
    // Convex in the exponent, so the sup sits at one of the two ends.
    let zero_limit = (2f64.sqrt() + 1.0).powi(2) * k.l1_norm().powi(2);
    let top = k.capacity_integral(2.0, 2f64.sqrt()).unwrap();
    assert!((c - zero_limit.max(top)).abs() < 1e-12);
    for e in [0.1, 0.7, 1.3, 1.9] {
        assert!(k.capacity_integral(e, 2f64.sqrt()).unwrap() <= c + 1e-9);
    }
}

#[test]
fn tau_matches_direct_integral() {
    let g = GaussSpec {
        s1: 1.0,
        s2: 1.5,
        theta: 30f64.to_radians(),
    };
    let m = g.model();
    for x in [[0.0, 0.0], [0.3, -0.2], [-1.0, 0.5]] {
        for d in [0.0f64, 15.0, 55.0, 100.0, 170.0] {
            let got = m.tau(&Rotation::from_degrees(d).unwrap(), x, 1e-10).unwrap();
            let reference = g.tau(d.to_radians(), x);
            assert!((got - reference).abs() < 1e-9, "x {x:?} d {d}: {got} vs {reference}");
        }
        let at_truth = m.tau(m.rotation(), x, 1e-10).unwrap();
        assert!((at_truth - g.density(x)).abs() < 1e-14);
    }
}

#[test]
fn gaussian_model_density_matches_covariance_form() {
    let g = GaussSpec {
        s1: 0.9,
        s2: 1.7,
        theta: -0.4,
    };
    let m = g.model();
    for x in [[0.0, 0.0], [0.5, 1.0], [-2.0, 0.3]] {
        assert!((m.density(x) - g.density(x)).abs() < 1e-15);
    }
}

#[test]
fn perturbed_marginal_is_a_density_with_consistent_cdf() {
    let m = Marginal::perturbed(2.0, 1.0, 0.5).unwrap();
    let breaks = [-12.0, -0.5, 0.0, 0.5, 12.0];
    let total = integrate_pieces(|y| m.density(y), &breaks, 1e-13);
    assert!((total - 1.0).abs() < 1e-10);
    for y in [-2.0, -0.4, -0.1, 0.0, 0.2, 0.45, 1.3] {
        let mut b: Vec<f64> = breaks.iter().copied().filter(|&v| v < y).collect();
        b.push(y);
        let reference = integrate_pieces(|t| m.density(t), &b, 1e-13);
        assert!((m.cdf(y) - reference).abs() < 1e-9, "y {y}");
        assert!((m.density(y) - m.density(-y)).abs() < 1e-15);
    }
}

#[test]
fn perturbed_sampler_passes_kolmogorov_smirnov() {
    let m = Marginal::perturbed(2.0, 1.0, 0.5).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let n = 20_000;
    let mut draws: Vec<f64> = (0..n).map(|_| m.draw(&mut rng)).collect();
    draws.sort_by(f64::total_cmp);
    let breaks = [-12.0, -0.5, 0.0, 0.5];
    // Reference CDF from the density alone.
    let cdf = |y: f64| {
        let mut b: Vec<f64> = breaks.iter().copied().filter(|&v| v < y).collect();
        b.push(y);
        integrate_pieces(|t| m.density(t), &b, 1e-12)
    };
    let step = 40;
    let mut d = 0.0f64;
    for (i, &y) in draws.iter().enumerate().step_by(step) {
        let f = cdf(y);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // 1% critical value of the KS statistic, widened for the thinned scan.
    let crit = 1.63 / (n as f64).sqrt() + step as f64 / n as f64;
    assert!(d < crit, "KS statistic {d} exceeds {crit}");
}

#[test]
fn directional_mean_matches_quadrature_expectation() {
    let g = GaussSpec {
        s1: 1.0,
        s2: 1.5,
        theta: 30f64.to_radians(),
    };
    let m = g.model();
    let k = Kernel::new(1);
    let (x, h, n, reps) = ([0.2, -0.1], 0.3, 400, 400);
    let b = [0.6, 0.8];
    let vals: Vec<f64> = (0..reps)
        .map(|r| directional_kde(&k, &m.sample(n, 1000 + r).unwrap(), x, h, b).unwrap())
        .collect();
    let (mean, se) = mean_se(&vals);
    let expect = g.expected_directional(&k, x, h, b);
    assert!((mean - expect).abs() < 3.5 * se, "{mean} vs {expect} (se {se})");
}

#[test]
fn auxiliary_mean_matches_pair_expectation() {
    let g = GaussSpec {
        s1: 1.0,
        s2: 1.5,
        theta: 30f64.to_radians(),
    };
    let m = g.model();
    let k = Kernel::new(1);
    let (x, h, n, reps) = ([0.3, -0.2], 0.4, 120, 600);
    for d in [0.0f64, 75.0] {
        let dr = Rotation::from_degrees(d).unwrap();
        let vals: Vec<f64> = (0..reps)
            .map(|r| {
                let s = m.sample(n, 50_000 + r).unwrap();
                auxiliary_estimate(&k, &s, x, h, &dr, m.rotation(), UStatMode::Pruned).unwrap()
            })
            .collect();
        let (mean, se) = mean_se(&vals);
        let expect = g.expected_pair(&k, x, h, d.to_radians(), g.theta);
        assert!((mean - expect).abs() < 3.5 * se, "d {d}: {mean} vs {expect} (se {se})");
    }
}

#[test]
fn oracle_mean_matches_quadrature_expectation() {
    // Gaussian model, n = 4096, β = 2, μ = ln n, 500 replications.
    let g = GaussSpec {
        s1: 1.0,
        s2: 1.5,
        theta: 30f64.to_radians(),
    };
    let m = g.model();
    let k = Kernel::new(1);
    let (x, n, reps) = ([0.0, 0.0], 4096usize, 500u64);
    let mu = (n as f64).ln();
    let h = structkde::risk::oracle_bandwidth(mu, n, 2.0).unwrap();
    let vals: Vec<f64> = (0..reps)
        .map(|r| {
            let s = m.sample(n, 7_000 + r).unwrap();
            structkde::risk::oracle_estimate(&k, &s, x, &m, mu, 2.0).unwrap()
        })
        .collect();
    let (mean, se) = mean_se(&vals);
    let expect = g.expected_product(&k, x, h, g.theta);
    assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} (se {se})");
}

#[test]
fn product_estimate_is_invariant_under_quarter_turns_of_d() {
    let m = Model::default_experiment().unwrap();
    let s = m.sample(300, 5).unwrap();
    let k = Kernel::new(1);
    for d in [0.0, 20.0, 65.0] {
        let a = product_estimate(&k, &s, [0.1, 0.1], 0.4, &Rotation::from_degrees(d).unwrap()).unwrap();
        let b = product_estimate(&k, &s, [0.1, 0.1], 0.4, &Rotation::from_degrees(d + 90.0).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
