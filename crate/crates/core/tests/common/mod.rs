#![allow(dead_code)]

use std::sync::Arc;

use gppa::gallery::{FeasibilityInstance, TrustRegionInstance};
use gppa::model::{Point, Problem, Quadratic, Zero};
use gppa::prox::{Ball, BoxSet, HalfSpace, SetOracle};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_point(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Point {
    Point::from_fn(n, |_, _| rng.gen_range(-half_width..half_width))
}

/// Uniform in the ball of radius `r`.
pub fn point_in_ball(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Point {
    loop {
        let p = uniform_point(rng, n, 1.0);
        if p.norm() <= 1.0 {
            return p * r;
        }
    }
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

pub fn random_trs(rng: &mut ChaCha8Rng, n: usize) -> TrustRegionInstance {
    let a = random_symmetric(rng, n);
    let b = uniform_point(rng, n, 1.0);
    let r = rng.gen_range(0.5..2.0);
    TrustRegionInstance::new(a, b, r, None).expect("valid instance")
}

/// `n = 2`, eigenvalues of opposite sign, `r = 1`.
pub fn random_mixed_trs_2d(rng: &mut ChaCha8Rng) -> TrustRegionInstance {
    let l1 = rng.gen_range(0.2..2.0);
    let l2 = -rng.gen_range(0.2..2.0);
    let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (s, c) = th.sin_cos();
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let d = DMatrix::from_diagonal(&Point::from_vec(vec![l1, l2]));
    let a = &q * d * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let b = uniform_point(rng, 2, 1.0);
    TrustRegionInstance::new(a, b, 1.0, None).expect("valid instance")
}

/// Ball and half-space (or box) with an intersection of nonempty interior.
pub fn random_feasibility(rng: &mut ChaCha8Rng, n: usize, variant: usize) -> FeasibilityInstance {
    let center = uniform_point(rng, n, 1.0);
    let radius = rng.gen_range(0.5..1.5);
    let ball: Arc<dyn SetOracle> = Arc::new(Ball::new(center.clone(), radius).unwrap());
    let mut normal = uniform_point(rng, n, 1.0);
    normal /= normal.norm();
    let offset = normal.dot(&center) + rng.gen_range(-0.5..0.5) * radius;
    let half: Arc<dyn SetOracle> = Arc::new(HalfSpace::new(normal, offset).unwrap());
    match variant % 3 {
        0 => FeasibilityInstance::new(half, ball, n).unwrap(),
        1 => FeasibilityInstance::new(ball, half, n).unwrap(),
        _ => {
            let lo = &center - Point::from_element(n, 0.5 * radius);
            let hi = &center + Point::from_element(n, 2.0 * radius);
            let bx: Arc<dyn SetOracle> = Arc::new(BoxSet::new(lo, hi).unwrap());
            FeasibilityInstance::new(bx, ball, n).unwrap()
        }
    }
}

/// `g2 = ½‖x‖²`, `g1 = h = 0`: with `t = 1/(1-λ)` every step maps `x` to `λx`.
pub fn contraction_problem(n: usize) -> Problem {
    Problem::new(
        "contraction",
        n,
        Arc::new(Zero),
        Arc::new(Quadratic::isotropic(1.0, Point::zeros(n))),
        Arc::new(Zero),
    )
}

pub fn contraction_stepsize(lambda: f64) -> f64 {
    1.0 / (1.0 - lambda)
}

pub fn max_abs_diff(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
