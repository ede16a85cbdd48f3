//! Monte Carlo laboratory behaviour.

use structkde::risk::{
    pointwise_risk, rate_constants, rate_study, selection_frequency, Estimator, EstimatorSpec, ModeSpec,
};
use structkde::{AdaptiveRule, Kernel, Marginal, Model, Rotation, RotationNet};

fn oracle(model: Model) -> Estimator {
    Estimator::new(EstimatorSpec::Oracle { mu: None }, Kernel::new(1), model, 2.0).unwrap()
}

#[test]
fn exact_estimator_has_zero_risk_and_a_degenerate_report() {
    let est = Estimator::new(EstimatorSpec::Exact, Kernel::new(1), Model::default_experiment().unwrap(), 2.0).unwrap();
    let r = pointwise_risk(&est, [0.0, 0.0], 50, 5, 1).unwrap();
    assert_eq!(r.risk, 0.0);
    assert_eq!(r.stderr, 0.0);
    let rep = rate_study(&est, [0.0, 0.0], &[50, 100, 200], 3, 1).unwrap();
    assert!(rep.is_degenerate());
    assert_eq!(rep.slope_stderr, None);
}

#[test]
fn pointwise_risk_needs_two_replications() {
    let est = oracle(Model::default_experiment().unwrap());
    assert!(pointwise_risk(&est, [0.0, 0.0], 100, 1, 1).is_err());
}

#[test]
fn replication_errors_carry_their_index() {
    let spec = EstimatorSpec::Adaptive {
        delta: 0.6,
        a_mult: 1.0,
        mode: ModeSpec::Pruned,
    };
    let est = Estimator::new(spec, Kernel::new(1), Model::default_experiment().unwrap(), 2.0).unwrap();
    // n = 20 has no admissible bandwidth grid, so every replication fails.
    let err = pointwise_risk(&est, [0.0, 0.0], 20, 3, 1).unwrap_err().to_string();
    assert!(err.contains("replication 0"), "{err}");
}

#[test]
fn risk_is_reproducible_and_thread_count_independent() {
    let est = oracle(Model::default_experiment().unwrap());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rate_study(&est, [0.1, 0.0], &[128, 256, 512], 40, 99).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
    let b = rate_study(&est, [0.1, 0.0], &[128, 256, 512], 40, 100).unwrap();
    assert_ne!(a.points[0].risk, b.points[0].risk);
}

#[test]
fn stderr_shrinks_like_inverse_root_of_reps() {
    // 20 seed pairs; doubling reps should scale the standard error by about 1/√2.
    let est = oracle(Model::default_experiment().unwrap());
    let mut ratios = Vec::new();
    for s in 0..20u64 {
        let small = pointwise_risk(&est, [0.0, 0.0], 400, 100, 10_000 + s).unwrap();
        let large = pointwise_risk(&est, [0.0, 0.0], 400, 200, 20_000 + s).unwrap();
        ratios.push(large.stderr / small.stderr);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((mean / target - 1.0).abs() < 0.2, "mean ratio {mean}");
}

#[test]
fn oracle_rate_constant_is_stable_across_the_grid() {
    let est = oracle(Model::default_experiment().unwrap());
    let rep = rate_study(&est, [0.0, 0.0], &[512, 1024, 2048, 4096, 8192], 200, 5).unwrap();
    let c = rate_constants(&rep, 2.0);
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    for v in &c {
        assert!(v.is_finite() && (v / mean - 1.0).abs() <= 0.3, "constants {c:?}");
    }
}

#[test]
fn isotropic_baseline_differs_from_the_rotated_product() {
    let m = Marginal::perturbed(2.0, 1.0, 0.5).unwrap();
    let model = Model::new(m.clone(), m, Rotation::from_degrees(45.0).unwrap(), 2.0, 1.0).unwrap();
    let s = model.sample(1000, 17).unwrap();
    let k = Kernel::new(1);
    let h = structkde::risk::isotropic_bandwidth(1000, 2.0);
    let iso = structkde::risk::isotropic_baseline(&k, &s, [0.0, 0.0], h).unwrap();
    let prod = structkde::estimator::product_estimate(&k, &s, [0.0, 0.0], h, model.rotation()).unwrap();
    assert!((iso - prod).abs() > 1e-6, "{iso} vs {prod}");
    // A single observation makes the joint and the product of marginal
    // averages coincide along the identity.
    let one = structkde::Sample::from_points(vec![[0.1, -0.2]]).unwrap();
    let a = structkde::risk::isotropic_baseline(&k, &one, [0.0, 0.0], 0.5).unwrap();
    let b = structkde::estimator::product_estimate(&k, &one, [0.0, 0.0], 0.5, &Rotation::identity()).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn selection_frequency_preconditions() {
    let m = Marginal::perturbed(2.0, 1.0, 0.5).unwrap();
    let model = Model::new(m.clone(), m, Rotation::from_degrees(10.0).unwrap(), 2.0, 1.0).unwrap();
    let single = AdaptiveRule::new(
        Kernel::new(1),
        RotationNet::singleton(*model.rotation()),
        2.0,
        1.0,
        2.0,
    )
    .unwrap();
    assert_eq!(selection_frequency(&model, &single, [0.0, 0.0], 200, 6, 1).unwrap(), 1.0);
    let lacking = AdaptiveRule::new(Kernel::new(1), RotationNet::build(0.6).unwrap(), 2.0, 1.0, 2.0).unwrap();
    assert!(selection_frequency(&model, &lacking, [0.0, 0.0], 200, 6, 1).is_err());
    let gauss = Model::standard_gaussian(Rotation::identity());
    let rule = AdaptiveRule::new(Kernel::new(1), RotationNet::build(0.6).unwrap(), 2.0, 1.0, 2.0).unwrap();
    assert!(selection_frequency(&gauss, &rule, [0.0, 0.0], 200, 6, 1).is_err());
}
