//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use gppa::cli::cmd_solve;
use gppa::diagnostics::{classify_rate, default_descent_tolerance, descent_report_from_records, square_summability, Regime};
use gppa::gallery::{example_4_3_fixture, trs_closed_form_step, trs_implicit_step, FeasibilityInstance, TrustRegionInstance};
use gppa::model::{Point, Problem, Quadratic, Zero};
use gppa::prox::{project_ball, soft_threshold, Ball, HalfSpace, Indicator, L1Norm, SetOracle};
use gppa::solver::{
    check_criticality_1d, criticality_residual, gppa_step, run_gppa, Criticality, Interval, SolverConfig, Status,
};
use gppa::Trace;
use nalgebra::DMatrix;
use rand::Rng;
use serde::Deserialize;

type Outcome = (bool, String);

/// Traces that passed their descent check, for the square-summability pass.
#[derive(Default)]
struct Accepted(Vec<Trace>);

/// Descent check on a trace at the default per-run tolerance.
fn violations(trace: &Trace, convex: bool) -> usize {
    let f0 = trace.records.first().map_or(trace.final_f, |r| r.f_value);
    let factor = gppa::solver::descent_factor(trace.config_echo.t, trace.lipschitz, convex);
    let final_gap = trace.records.last().map(|r| r.descent_gap);
    descent_report_from_records(&trace.records, final_gap, factor, default_descent_tolerance(f0)).violations
}

fn descent_inequality(acc: &mut Accepted) -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(1001);
    let mut bad = 0;
    let mut steps = 0;
    for _ in 0..50 {
        let inst = common::random_trs(&mut rng, 10);
        let problem = inst.problem();
        let x0 = common::point_in_ball(&mut rng, 10, inst.radius());
        let trace = run_gppa(&problem, &x0, &SolverConfig::for_problem(&problem)).unwrap();
        let v = violations(&trace, false) + usize::from(trace.status == Status::DescentViolation);
        bad += v;
        steps += trace.iterations();
        if v == 0 {
            acc.0.push(trace);
        }
    }
    for i in 0..20 {
        let n = 2 + i % 5;
        let inst = common::random_feasibility(&mut rng, n, i);
        let problem = inst.problem();
        let x0 = inst.set_a().project(&common::uniform_point(&mut rng, n, 4.0)).unwrap();
        let trace = run_gppa(&problem, &x0, &SolverConfig::for_problem(&problem)).unwrap();
        let v = violations(&trace, false) + usize::from(trace.status == Status::DescentViolation);
        bad += v;
        steps += trace.iterations();
        if v == 0 {
            acc.0.push(trace);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        bad == 0 && secs < 30.0,
        format!("70 runs, {steps} steps, {bad} violations, {secs:.2}s"),
    )
}

fn convex_descent(acc: &mut Accepted) -> Outcome {
    let mut rng = common::rng(1002);
    let mut bad = 0;
    let mut steps = 0;
    for i in 0..20 {
        let n = [2, 5, 10][i % 3];
        let inst = common::random_trs(&mut rng, n);
        let problem = inst.problem();
        let cfg = SolverConfig::convex_for_problem(&problem);
        let x0 = common::point_in_ball(&mut rng, n, inst.radius());
        let trace = run_gppa(&problem, &x0, &cfg).unwrap();
        let v = violations(&trace, true) + usize::from(trace.status == Status::DescentViolation);
        bad += v;
        steps += trace.iterations();
        if v == 0 {
            acc.0.push(trace);
        }
    }
    (bad == 0, format!("20 runs at t = 0.75L, {steps} steps, {bad} violations"))
}

#[derive(Deserialize)]
struct TrsFixture {
    instances: Vec<TrsFixtureCase>,
}

#[derive(Deserialize)]
struct TrsFixtureCase {
    a: Vec<f64>,
    b: Vec<f64>,
    r: f64,
    f_star: f64,
}

fn trs_oracle_equivalence(acc: &mut Accepted) -> Outcome {
    let start = Instant::now();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/trs_bruteforce.json");
    let fixture: TrsFixture = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let mut rng = common::rng(1003);
    let mut worst: f64 = 0.0;
    for case in &fixture.instances {
        let inst = TrustRegionInstance::new(
            DMatrix::from_row_slice(2, 2, &case.a),
            Point::from_row_slice(&case.b),
            case.r,
            None,
        )
        .unwrap();
        let problem = inst.problem();
        let cfg = SolverConfig::for_problem(&problem);
        let mut best = f64::INFINITY;
        for _ in 0..20 {
            let x0 = common::point_in_ball(&mut rng, 2, case.r);
            let trace = run_gppa(&problem, &x0, &cfg).unwrap();
            best = best.min(inst.quadratic_value(&trace.final_x));
            acc.0.push(trace);
        }
        worst = worst.max((best - case.f_star).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    (
        fixture.instances.len() == 10 && worst <= 1e-4 && secs < 60.0,
        format!("{} instances, max |best - brute force| = {worst:.3e}, {secs:.2}s", fixture.instances.len()),
    )
}

fn closed_form_cross_check() -> Outcome {
    let mut rng = common::rng(1004);
    let (mut explicit, mut implicit): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let n = [2, 5, 10][i % 3];
        let inst = common::random_trs(&mut rng, n);
        let x = common::point_in_ball(&mut rng, n, inst.radius());
        let t = inst.rho().max(0.1) * rng.gen_range(1.01..5.0);
        explicit = explicit.max(common::max_abs_diff(
            &trs_closed_form_step(&inst, &x, t).unwrap(),
            &gppa_step(&inst.problem(), &x, t).unwrap().x_next,
        ));
        implicit = implicit.max(common::max_abs_diff(
            &trs_implicit_step(&inst, &x, t).unwrap(),
            &gppa_step(&inst.implicit_problem(), &x, t).unwrap().x_next,
        ));
    }
    (
        explicit <= 1e-12 && implicit <= 1e-12,
        format!("200 triples, max deviation {explicit:.2e} (implicit split {implicit:.2e})"),
    )
}

fn reductions() -> Outcome {
    let mut rng = common::rng(1005);
    let n = 6;
    let q = common::random_symmetric(&mut rng, n);
    let c = common::uniform_point(&mut rng, n, 1.0);
    let g2 = Quadratic::with_spectral_lipschitz(q, c).unwrap();
    let pg = Problem::new(
        "projected-gradient",
        n,
        Arc::new(Indicator::new(Arc::new(Ball::centered(n, 1.0).unwrap()))),
        Arc::new(g2.clone()),
        Arc::new(Zero),
    );
    let mut pg_dev: f64 = 0.0;
    for _ in 0..100 {
        let x = common::point_in_ball(&mut rng, n, 1.0);
        let t = rng.gen_range(0.1..10.0);
        let expect = project_ball(&(&x - (g2.matrix() * &x + g2.linear()) / t), 1.0).unwrap();
        pg_dev = pg_dev.max(common::max_abs_diff(&gppa_step(&pg, &x, t).unwrap().x_next, &expect));
    }

    let m = common::random_symmetric(&mut rng, n);
    let psd = &m * &m;
    let lin = common::uniform_point(&mut rng, n, 1.0);
    let ppa = Problem::new(
        "ppa",
        n,
        Arc::new(L1Norm::new(0.8).unwrap()),
        Arc::new(Zero),
        Arc::new(Quadratic::with_spectral_lipschitz(psd.clone(), lin.clone()).unwrap()),
    );
    let mut ppa_dev: f64 = 0.0;
    for _ in 0..100 {
        let x = common::uniform_point(&mut rng, n, 3.0);
        let t = rng.gen_range(0.1..10.0);
        let y = &psd * &x + &lin;
        let expect = soft_threshold(&(&x + y / t), 0.8, t).unwrap();
        ppa_dev = ppa_dev.max(common::max_abs_diff(&gppa_step(&ppa, &x, t).unwrap().x_next, &expect));
    }
    (
        pg_dev <= 1e-12 && ppa_dev <= 1e-12,
        format!("h = 0: {pg_dev:.2e}, g2 = 0: {ppa_dev:.2e} over 100 points each"),
    )
}

fn criticality_fixtures() -> Outcome {
    let class = check_criticality_1d(
        Interval::new(-3.0, 3.0).unwrap(),
        3.0,
        Interval::new(-1.0, 1.0).unwrap(),
    )
    .unwrap();
    let (inst, x_bar) = example_4_3_fixture(0.25).unwrap();
    let problem = inst.problem();
    let residual = criticality_residual(&problem, &x_bar, SolverConfig::for_problem(&problem).t).unwrap();
    let f = |x: &Point| problem.evaluate_objective(x).unwrap().finite().unwrap();
    let (f_bar, f_eps) = (f(&x_bar), f(&Point::from_vec(vec![0.1, 1.0])));
    (
        class == Criticality::CriticalNotStationary && residual <= 1e-10 && f_eps < f_bar,
        format!("1-D class {class:?}, residual at x̄ {residual:.1e}, f(0.1, 1) = {f_eps:.6} < f(x̄) = {f_bar}"),
    )
}

fn feasibility_convergence(acc: &mut Accepted) -> Outcome {
    let mut ok = true;
    let mut worst_d: f64 = 0.0;
    let mut most_iters = 0;
    for n in [2, 3, 5] {
        let ball: Arc<dyn SetOracle> = Arc::new(Ball::new(Point::from_element(n, 0.5), 1.0).unwrap());
        let mut normal = Point::zeros(n);
        normal[0] = 1.0;
        let half: Arc<dyn SetOracle> = Arc::new(HalfSpace::new(normal, 0.25).unwrap());
        let inst = FeasibilityInstance::new(half, ball, n).unwrap();
        let x0 = inst.set_a().project(&Point::from_element(n, -4.0)).unwrap();
        let trace = run_gppa(&inst.problem(), &x0, &SolverConfig::new(2.0).with_max_iters(2000)).unwrap();
        let d = inst.distance_to_b(&trace.final_x).unwrap();
        ok &= trace.status == Status::Converged && inst.set_a().contains(&trace.final_x) && d <= 1e-6;
        worst_d = worst_d.max(d);
        most_iters = most_iters.max(trace.iterations());
        acc.0.push(trace);
    }

    let (inst, _) = example_4_3_fixture(0.25).unwrap();
    let problem = inst.problem();
    let mut monotone = true;
    let mut last_step: f64 = 0.0;
    for x0 in [[0.5, 1.0], [-1.5, 2.0], [3.0, 1.0], [0.01, 5.0]] {
        let cfg = SolverConfig::new(2.0).with_points(true);
        let trace = run_gppa(&problem, &Point::from_row_slice(&x0), &cfg).unwrap();
        let half_d2: Vec<f64> = trace
            .records
            .iter()
            .map(|r| 0.5 * inst.distance_to_b(r.x.as_ref().unwrap()).unwrap().powi(2))
            .collect();
        monotone &= half_d2.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        monotone &= trace.records.iter().all(|r| inst.set_a().contains(r.x.as_ref().unwrap()));
        let step = trace.last_step_norm().unwrap();
        ok &= trace.status == Status::Converged && step <= cfg.epsilon;
        last_step = last_step.max(step);
        acc.0.push(trace);
    }
    (
        ok && monotone,
        format!(
            "ball ∩ half-space: max d_B {worst_d:.1e} in ≤ {most_iters} iterations; parabola B: last step ≤ {last_step:.1e}, ½d²_B monotone: {monotone}"
        ),
    )
}

fn rate_classification(acc: &mut Accepted) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [0.3, 0.5, 0.9] {
        let problem = common::contraction_problem(3);
        let cfg = SolverConfig::new(common::contraction_stepsize(lambda)).with_epsilon(1e-12);
        let trace = run_gppa(&problem, &Point::from_vec(vec![1.0, -2.0, 0.5]), &cfg).unwrap();
        let rate = classify_rate(&trace);
        let q = rate.q.unwrap_or(f64::NAN);
        ok &= rate.regime == Regime::Linear && (q - lambda).abs() <= 0.05 && rate.fit_r2 >= 0.999;
        parts.push(format!("λ={lambda}: q={q:.4} r²={:.5}", rate.fit_r2));
        acc.0.push(trace);
    }
    let l1 = Problem::new(
        "l1",
        1,
        Arc::new(L1Norm::new(1.0).unwrap()),
        Arc::new(Quadratic::isotropic(1.0, Point::zeros(1))),
        Arc::new(Zero),
    );
    let trace = run_gppa(&l1, &Point::from_vec(vec![7.0]), &SolverConfig::new(2.0)).unwrap();
    let finite = classify_rate(&trace).regime;
    ok &= finite == Regime::Finite;
    parts.push(format!("exact fixed point: {}", finite.as_str()));
    acc.0.push(trace);
    (ok, parts.join(", "))
}

fn square_summability_all(acc: &Accepted) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failing = 0;
    for trace in &acc.0 {
        let r = square_summability(trace);
        if !r.holds(1e-8) {
            failing += 1;
        }
        worst = worst.max(r.sum_squares - r.bound);
    }
    (
        failing == 0 && !acc.0.is_empty(),
        format!("{} traces, max Σ‖Δ‖² - bound = {worst:.3e}", acc.0.len()),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "x0 = \"random:42\"\n\n[problem]\nkind = \"trs\"\nn = 3\na = [1.0, 0.2, -0.4, 0.2, -1.5, 0.3, -0.4, 0.3, 0.5]\nb = [0.1, -0.7, 0.2]\nr = 1.5\n\n[output]\ntrace = \"trace.csv\"\nreport = \"summary.json\"\nrecord_points = true\n",
    )
    .unwrap();
    let read = || {
        (
            fs::read(dir.path().join("trace.csv")).unwrap(),
            fs::read(dir.path().join("summary.json")).unwrap(),
        )
    };
    let c1 = cmd_solve(&cfg);
    let first = read();
    let c2 = cmd_solve(&cfg);
    let second = read();
    (
        c1 == 0 && c2 == 0 && first == second,
        format!("exit codes {c1}/{c2}, trace {} bytes, summary {} bytes", first.0.len(), first.1.len()),
    )
}

fn main() {
    let mut acc = Accepted::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut Accepted) -> Outcome, acc: &mut Accepted| {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(acc)))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            });
        results.push((name, outcome));
    };
    run("1 descent inequality", &mut descent_inequality, &mut acc);
    run("2 convex-g1 descent", &mut convex_descent, &mut acc);
    run("3 TRS oracle equivalence", &mut trs_oracle_equivalence, &mut acc);
    run("4 closed-form cross-check", &mut |_| closed_form_cross_check(), &mut acc);
    run("5 reductions", &mut |_| reductions(), &mut acc);
    run("6 criticality fixtures", &mut |_| criticality_fixtures(), &mut acc);
    run("7 feasibility convergence", &mut feasibility_convergence, &mut acc);
    run("8 rate classification", &mut rate_classification, &mut acc);
    run("9 square-summability", &mut |a| square_summability_all(a), &mut acc);
    run("10 determinism", &mut |_| determinism(), &mut acc);

    let mut failed = 0;
    for (name, (pass, detail)) in &results {
        println!("[{}] {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
