mod common;

use std::sync::Arc;

use gppa::diagnostics::{boundedness_monitor, classify_rate, verify_descent_report, Regime};
use gppa::model::{Point, Problem, Quadratic, SmoothOracle, Zero};
use gppa::solver::{run_gppa, SolverConfig, Status};

#[test]
fn contraction_family_recovers_factor() {
    for lambda in [0.3, 0.5, 0.9] {
        let problem = common::contraction_problem(3);
        let cfg = SolverConfig::new(common::contraction_stepsize(lambda)).with_epsilon(1e-12);
        let x0 = Point::from_vec(vec![1.0, -2.0, 0.5]);
        let trace = run_gppa(&problem, &x0, &cfg).unwrap();
        let rate = classify_rate(&trace);
        assert_eq!(rate.regime, Regime::Linear, "lambda = {lambda}: {rate:?}");
        assert!((rate.q.unwrap() - lambda).abs() <= 0.05, "lambda = {lambda}: {rate:?}");
        assert!(rate.fit_r2 >= 0.999);
        assert!(rate.is_consistent());
    }
}

/// `¼‖x‖⁴` summed per coordinate; `L = 3` on the unit box.
struct Quartic;

impl SmoothOracle for Quartic {
    fn evaluate(&self, x: &Point) -> f64 {
        x.iter().map(|v| 0.25 * v.powi(4)).sum()
    }

    fn gradient(&self, x: &Point) -> Point {
        x.map(|v| v.powi(3))
    }

    fn lipschitz(&self) -> f64 {
        3.0
    }
}

#[test]
fn quartic_run_is_sublinear() {
    let problem = Problem::new("quartic", 1, Arc::new(Zero), Arc::new(Quartic), Arc::new(Zero));
    let cfg = SolverConfig::new(4.5).with_epsilon(1e-7).with_max_iters(1_000_000);
    let trace = run_gppa(&problem, &Point::from_vec(vec![1.0]), &cfg).unwrap();
    assert_eq!(trace.status, Status::Converged);
    let rate = classify_rate(&trace);
    assert_eq!(rate.regime, Regime::Sublinear, "{rate:?}");
    assert!((rate.exponent.unwrap() + 0.5).abs() <= 0.1, "{rate:?}");
    assert!((rate.theta_hat.unwrap() - 0.75).abs() <= 0.05, "{rate:?}");
    assert!(rate.is_consistent());
}

#[test]
fn soft_threshold_run_terminates_finitely() {
    let problem = Problem::new(
        "l1",
        1,
        Arc::new(gppa::prox::L1Norm::new(1.0).unwrap()),
        Arc::new(Quadratic::isotropic(1.0, Point::zeros(1))),
        Arc::new(Zero),
    );
    let trace = run_gppa(&problem, &Point::from_vec(vec![7.0]), &SolverConfig::new(2.0)).unwrap();
    let xs: Vec<f64> = trace.records.iter().map(|r| r.step_norm).collect();
    assert_eq!(xs, vec![4.0, 2.0, 1.0, 0.0]);
    let rate = classify_rate(&trace);
    assert_eq!(rate.regime, Regime::Finite);
    assert_eq!(rate.theta_hat, Some(0.0));
}

#[test]
fn rate_reports_are_consistent_on_gallery_traces() {
    let mut rng = common::rng(21);
    for i in 0..40 {
        let trace = if i % 2 == 0 {
            let inst = common::random_trs(&mut rng, 2 + i % 7);
            let x0 = common::point_in_ball(&mut rng, inst.dim(), inst.radius());
            run_gppa(&inst.problem(), &x0, &SolverConfig::for_problem(&inst.problem())).unwrap()
        } else {
            let inst = common::random_feasibility(&mut rng, 2 + i % 4, i);
            let x0 = inst.set_a().project(&common::uniform_point(&mut rng, inst.dim(), 4.0)).unwrap();
            run_gppa(&inst.problem(), &x0, &SolverConfig::new(1.5)).unwrap()
        };
        let rate = classify_rate(&trace);
        assert!(rate.is_consistent(), "{rate:?}");
        let report = verify_descent_report(&trace, trace.config_echo.t, trace.lipschitz, false);
        assert!(report.passed());
    }
}

#[test]
fn divergent_toy_is_flagged() {
    // f = -½‖x‖²: every step doubles the iterate
    let problem = Problem::new(
        "divergent",
        2,
        Arc::new(Zero),
        Arc::new(Zero),
        Arc::new(Quadratic::isotropic(1.0, Point::zeros(2))),
    );
    let cfg = SolverConfig::new(1.0).with_max_iters(60).with_points(true);
    let trace = run_gppa(&problem, &Point::from_vec(vec![1.0, 1.0]), &cfg).unwrap();
    assert_eq!(trace.status, Status::MaxIters);
    let report = boundedness_monitor(&trace, None).unwrap();
    assert!(report.flagged);
    let first = report.first_exceeding.unwrap();
    assert!(first > 15 && first < 30, "first exceeding at {first}");
    assert_eq!(classify_rate(&trace).regime, Regime::Inconclusive);

    let bounded = run_gppa(
        &common::contraction_problem(2),
        &Point::from_vec(vec![1.0, 1.0]),
        &SolverConfig::new(2.0).with_points(true),
    )
    .unwrap();
    assert!(!boundedness_monitor(&bounded, None).unwrap().flagged);
}
