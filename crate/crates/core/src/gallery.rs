//! Concrete problems: the trust-region subproblem, two-set feasibility, and
//! two small fixtures where criticality and local optimality part ways.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GppaError, Result};
use crate::model::{check_symmetric, estimate_symmetric_max_eigenvalue, ConvexOracle, Point, Problem, Quadratic, Zero};
use crate::prox::{project_ball, Ball, HalfSpace, Indicator, IsotropicQuadraticOnSet, L1Norm, ParabolaRegion, SetOracle};

const EIGEN_TOL: f64 = 1e-12;

/// `min ½xᵀAx + bᵀx` subject to `‖x‖ ≤ r`, split as
///
/// ```text
/// g1 = δ(·; E),  g2 = ½ρ‖x‖² + bᵀx,  h = ½xᵀ(ρI - A)x
/// ```
///
/// with `ρ ≥ λ_max(A)` so that `h` is convex. `L = ρ`.
#[derive(Debug, Clone)]
pub struct TrustRegionInstance {
    a: DMatrix<f64>,
    b: Point,
    r: f64,
    rho: f64,
    h_lipschitz: f64,
}

impl TrustRegionInstance {
    /// Without `rho`, uses `max(λ̂_max(A) + 1e-6·(1 + |λ̂_max|), 0)`. A given
    /// `rho` must be nonnegative.
    pub fn new(a: DMatrix<f64>, b: Point, r: f64, rho: Option<f64>) -> Result<Self> {
        check_symmetric(&a)?;
        if a.nrows() != b.len() {
            return Err(GppaError::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "trust-region radius must be positive, got {r}"
            )));
        }
        let lambda_max = estimate_symmetric_max_eigenvalue(&a, EIGEN_TOL)?;
        let rho = match rho {
            Some(rho) if rho < 0.0 => {
                return Err(GppaError::InvalidParameter(format!(
                    "rho must be nonnegative, got {rho}"
                )));
            }
            Some(rho) => {
                // The Rayleigh estimate never exceeds λ_max, so only rounding
                // slack is needed here.
                if !rho.is_finite() || rho < lambda_max - 1e-10 * lambda_max.abs().max(1.0) {
                    return Err(GppaError::NotPsdShift { rho, lambda_max });
                }
                rho
            }
            None => (lambda_max + 1e-6 * (1.0 + lambda_max.abs())).max(0.0),
        };
        let n = a.nrows();
        let shifted = DMatrix::identity(n, n) * rho - &a;
        let h_lipschitz = estimate_symmetric_max_eigenvalue(&shifted, EIGEN_TOL)?.max(0.0);
        Ok(Self {
            a,
            b,
            r,
            rho,
            h_lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &Point {
        &self.b
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `L(h) = λ_max(ρI - A)`.
    pub fn h_lipschitz(&self) -> f64 {
        self.h_lipschitz
    }

    /// `½xᵀAx + bᵀx`, ignoring the ball.
    pub fn quadratic_value(&self, x: &Point) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x)
    }

    fn ball(&self) -> Arc<dyn SetOracle> {
        Arc::new(Ball::centered(self.dim(), self.r).expect("radius validated"))
    }

    fn h(&self) -> Quadratic {
        let n = self.dim();
        let shifted = DMatrix::identity(n, n) * self.rho - &self.a;
        Quadratic::new(shifted, Point::zeros(n), self.h_lipschitz).expect("symmetric by construction")
    }

    /// The GPPA problem for this instance.
    pub fn problem(&self) -> Problem {
        Problem::new(
            "trs",
            self.dim(),
            Arc::new(Indicator::new(self.ball())),
            Arc::new(Quadratic::isotropic(self.rho, self.b.clone())),
            Arc::new(self.h()),
        )
    }

    /// Same objective with the smooth quadratic folded into `g1`:
    /// `g1 = ½ρ‖x‖² + bᵀx + δ(·; E)`, `g2 = 0`. GPPA on this split is the
    /// plain proximal point method and its step is [`trs_implicit_step`].
    pub fn implicit_problem(&self) -> Problem {
        let g1 = IsotropicQuadraticOnSet::new(self.rho, self.b.clone(), self.ball())
            .expect("rho validated");
        Problem::new("trs-implicit", self.dim(), Arc::new(g1), Arc::new(Zero), Arc::new(self.h()))
    }
}

/// Builds the trust-region problem; see [`TrustRegionInstance`].
pub fn build_trust_region(a: DMatrix<f64>, b: Point, r: f64, rho: Option<f64>) -> Result<Problem> {
    Ok(TrustRegionInstance::new(a, b, r, rho)?.problem())
}

/// Closed form of one GPPA step on [`TrustRegionInstance::problem`]:
/// `P_E(x - (Ax + b)/t)`. The `ρ` terms of `∇g2` and `∇h` cancel.
pub fn trs_closed_form_step(instance: &TrustRegionInstance, x: &Point, t: f64) -> Result<Point> {
    check_step_args(instance, x, t)?;
    let pre = x - (instance.a() * x + instance.b()) / t;
    project_ball(&pre, instance.r)
}

/// `P_E(((t + ρ)x - Ax - b)/(t + ρ))`, the step obtained when `∇g2` is
/// evaluated at the new iterate. Equals one GPPA step on
/// [`TrustRegionInstance::implicit_problem`].
pub fn trs_implicit_step(instance: &TrustRegionInstance, x: &Point, t: f64) -> Result<Point> {
    check_step_args(instance, x, t)?;
    let s = t + instance.rho;
    let pre = (x * s - instance.a() * x - instance.b()) / s;
    project_ball(&pre, instance.r)
}

fn check_step_args(instance: &TrustRegionInstance, x: &Point, t: f64) -> Result<()> {
    if x.len() != instance.dim() {
        return Err(GppaError::DimensionMismatch {
            expected: instance.dim(),
            found: x.len(),
        });
    }
    if !(t > 0.0) {
        return Err(GppaError::InvalidParameter(format!("stepsize must be positive, got {t}")));
    }
    Ok(())
}

const BRUTE_FORCE_MAX_DIM: usize = 3;
const REFINE_ROUNDS: usize = 60;

/// Exhaustive reference minimizer of the trust-region subproblem for
/// `n ≤ 3`.
///
/// Scans a uniform grid of the cube `[-r, r]ⁿ` restricted to the ball and a
/// matching angular grid of the sphere, then polishes the best interior
/// point by exact coordinate minimization and the best boundary point by
/// golden-section search on each angle. Returns the better of the two.
pub fn trs_brute_force(instance: &TrustRegionInstance, grid_points_per_axis: usize) -> Result<(Point, f64)> {
    let n = instance.dim();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(GppaError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    if grid_points_per_axis < 101 {
        return Err(GppaError::InvalidParameter(format!(
            "brute force needs at least 101 grid points per axis, got {grid_points_per_axis}"
        )));
    }
    let q = SmallQuadratic::new(instance);
    let interior = q.refine_interior(q.scan_interior(grid_points_per_axis));
    let boundary = q.refine_boundary(q.scan_boundary(grid_points_per_axis), grid_points_per_axis);
    let (x, f) = if boundary.1 < interior.1 { boundary } else { interior };
    Ok((Point::from_row_slice(&x[..n]), f))
}

/// Allocation-free evaluation of `½xᵀAx + bᵀx` for `n ≤ 3`.
struct SmallQuadratic {
    n: usize,
    a: [[f64; 3]; 3],
    b: [f64; 3],
    r: f64,
}

impl SmallQuadratic {
    fn new(inst: &TrustRegionInstance) -> Self {
        let n = inst.dim();
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for i in 0..n {
            b[i] = inst.b[i];
            for j in 0..n {
                a[i][j] = inst.a[(i, j)];
            }
        }
        Self { n, a, b, r: inst.r }
    }

    fn value(&self, x: &[f64; 3]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.n {
            let mut ax = 0.0;
            for j in 0..self.n {
                ax += self.a[i][j] * x[j];
            }
            v += x[i] * (0.5 * ax + self.b[i]);
        }
        v
    }

    fn scan_interior(&self, m: usize) -> ([f64; 3], f64) {
        let h = 2.0 * self.r / (m - 1) as f64;
        let coord = |i: usize| -self.r + h * i as f64;
        let r2 = self.r * self.r;
        let mut best = ([0.0; 3], self.value(&[0.0; 3]));
        let counts = [m, if self.n > 1 { m } else { 1 }, if self.n > 2 { m } else { 1 }];
        let mut x = [0.0; 3];
        for i in 0..counts[0] {
            x[0] = coord(i);
            for j in 0..counts[1] {
                x[1] = if self.n > 1 { coord(j) } else { 0.0 };
                let partial = x[0] * x[0] + x[1] * x[1];
                if partial > r2 {
                    continue;
                }
                for k in 0..counts[2] {
                    x[2] = if self.n > 2 { coord(k) } else { 0.0 };
                    if partial + x[2] * x[2] > r2 {
                        continue;
                    }
                    let v = self.value(&x);
                    if v < best.1 {
                        best = (x, v);
                    }
                }
            }
        }
        best
    }

    /// Cyclic exact minimization along coordinates, each restricted to the
    /// chord of the ball through the current point.
    fn refine_interior(&self, start: ([f64; 3], f64)) -> ([f64; 3], f64) {
        let (mut x, _) = start;
        for _ in 0..500 {
            for i in 0..self.n {
                let others: f64 = (0..self.n).filter(|&j| j != i).map(|j| x[j] * x[j]).sum();
                let half = (self.r * self.r - others).max(0.0).sqrt();
                // φ(x + s eᵢ) is ½ aᵢᵢ s² + gᵢ s + const along the chord.
                let grad_i: f64 = (0..self.n).map(|j| self.a[i][j] * x[j]).sum::<f64>() + self.b[i];
                let aii = self.a[i][i];
                let (lo, hi) = (-half, half);
                let mut candidates = vec![lo, hi];
                if aii > 0.0 {
                    candidates.push((x[i] - grad_i / aii).clamp(lo, hi));
                }
                let mut best = (x[i], self.value(&x));
                for c in candidates {
                    let mut y = x;
                    y[i] = c;
                    let v = self.value(&y);
                    if v < best.1 {
                        best = (c, v);
                    }
                }
                x[i] = best.0;
            }
        }
        let v = self.value(&x);
        (x, v)
    }

    fn sphere_point(&self, angles: &[f64; 2]) -> [f64; 3] {
        let r = self.r;
        match self.n {
            1 => [if angles[0] < 0.0 { -r } else { r }, 0.0, 0.0],
            2 => [r * angles[0].cos(), r * angles[0].sin(), 0.0],
            _ => [
                r * angles[0].sin() * angles[1].cos(),
                r * angles[0].sin() * angles[1].sin(),
                r * angles[0].cos(),
            ],
        }
    }

    fn scan_boundary(&self, m: usize) -> ([f64; 2], f64) {
        use std::f64::consts::PI;
        let mut best = ([0.0; 2], f64::INFINITY);
        let mut consider = |angles: [f64; 2]| {
            let v = self.value(&self.sphere_point(&angles));
            if v < best.1 {
                best = (angles, v);
            }
        };
        match self.n {
            1 => {
                consider([-1.0, 0.0]);
                consider([1.0, 0.0]);
            }
            2 => {
                let count = 4 * m;
                for i in 0..count {
                    consider([2.0 * PI * i as f64 / count as f64, 0.0]);
                }
            }
            _ => {
                for i in 0..=m {
                    let theta = PI * i as f64 / m as f64;
                    for j in 0..2 * m {
                        consider([theta, PI * j as f64 / m as f64]);
                    }
                }
            }
        }
        best
    }

    fn refine_boundary(&self, start: ([f64; 2], f64), m: usize) -> ([f64; 3], f64) {
        let (mut angles, _) = start;
        if self.n > 1 {
            let mut width = 4.0 * std::f64::consts::PI / m as f64;
            let dims = if self.n == 2 { 1 } else { 2 };
            for _ in 0..REFINE_ROUNDS {
                for d in 0..dims {
                    let f = |a: f64| {
                        let mut trial = angles;
                        trial[d] = a;
                        self.value(&self.sphere_point(&trial))
                    };
                    angles[d] = golden_section(f, angles[d] - width, angles[d] + width);
                }
                width *= 0.7;
            }
        }
        let x = self.sphere_point(&angles);
        let v = self.value(&x);
        (x, v)
    }
}

/// Golden-section search for a local minimizer of `f` on `[a, b]`; returns
/// the best point seen, never worse than the midpoint.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    for (p, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (p, v);
        }
    }
    best.0
}

/// `½ d²_B` restricted to `A`, split as
///
/// ```text
/// g1 = δ(·; A),  g2 = ½‖x‖²,  h = ½(‖x‖² - d²_B)
/// ```
#[derive(Clone)]
pub struct FeasibilityInstance {
    set_a: Arc<dyn SetOracle>,
    set_b: Arc<dyn SetOracle>,
    dim: usize,
}

impl fmt::Debug for FeasibilityInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeasibilityInstance")
            .field("set_a", &self.set_a.name())
            .field("set_b", &self.set_b.name())
            .field("dim", &self.dim)
            .finish()
    }
}

impl FeasibilityInstance {
    /// Both sets must be nonempty; the projection of the origin serves as
    /// the witness.
    pub fn new(set_a: Arc<dyn SetOracle>, set_b: Arc<dyn SetOracle>, dim: usize) -> Result<Self> {
        for (label, set) in [("A", &set_a), ("B", &set_b)] {
            let witness = set.project(&Point::zeros(dim))?;
            if witness.len() != dim || !set.contains(&witness) {
                return Err(GppaError::InvalidParameter(format!(
                    "set {label} ({}) produced no member witness",
                    set.name()
                )));
            }
        }
        Ok(Self { set_a, set_b, dim })
    }

    pub fn set_a(&self) -> &dyn SetOracle {
        self.set_a.as_ref()
    }

    pub fn set_b(&self) -> &dyn SetOracle {
        self.set_b.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dist(x, B)`.
    pub fn distance_to_b(&self, x: &Point) -> Result<f64> {
        Ok((x - self.set_b.project(x)?).norm())
    }

    pub fn problem(&self) -> Problem {
        Problem::new(
            format!("feasibility[{} | {}]", self.set_a.name(), self.set_b.name()),
            self.dim,
            Arc::new(Indicator::new(self.set_a.clone())),
            Arc::new(Quadratic::isotropic(1.0, Point::zeros(self.dim))),
            Arc::new(SupportOfSet {
                set: self.set_b.clone(),
            }),
        )
    }
}

/// `h(x) = ½(‖x‖² - d²_B(x)) = sup_{y ∈ B} ⟨x, y⟩ - ½‖y‖²`.
///
/// Evaluated as `⟨x, p⟩ - ½‖p‖²` at the nearest point `p`, which is also
/// the subgradient selection (an element of `co P_B(x)`).
struct SupportOfSet {
    set: Arc<dyn SetOracle>,
}

impl SupportOfSet {
    fn nearest(&self, x: &Point) -> Point {
        self.set
            .project(x)
            .unwrap_or_else(|_| Point::from_element(x.len(), f64::NAN))
    }
}

impl ConvexOracle for SupportOfSet {
    fn evaluate(&self, x: &Point) -> f64 {
        let p = self.nearest(x);
        x.dot(&p) - 0.5 * p.norm_squared()
    }

    fn subgradient(&self, x: &Point) -> Point {
        self.nearest(x)
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        // ∇h = P_B is 1-Lipschitz for convex B.
        self.set.is_convex().then_some(1.0)
    }
}

/// Feasibility problem for two sets; see [`FeasibilityInstance`].
pub fn build_feasibility(set_a: Arc<dyn SetOracle>, set_b: Arc<dyn SetOracle>, dim: usize) -> Result<Problem> {
    Ok(FeasibilityInstance::new(set_a, set_b, dim)?.problem())
}

/// `A = {x₂ ≥ 1}`, `B = {x₂ ≤ α x₁²}` with `0 < α < ½`, and `x̄ = (0, 1)`.
///
/// `P_B(x̄) = {(0, 0)}`, so `x̄` is a fixed point of the iteration, yet
/// `(ε, 1)` is strictly closer to `B` for every `ε ≠ 0`.
pub fn example_4_3_fixture(alpha: f64) -> Result<(FeasibilityInstance, Point)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(GppaError::InvalidParameter(format!(
            "parabola coefficient must lie in (0, 1/2), got {alpha}"
        )));
    }
    let a = HalfSpace::at_least(Point::from_vec(vec![0.0, 1.0]), 1.0)?;
    let b = ParabolaRegion::new(alpha)?;
    let inst = FeasibilityInstance::new(Arc::new(a), Arc::new(b), 2)?;
    Ok((inst, Point::from_vec(vec![0.0, 1.0])))
}

/// `f(x) = 3|x| + 3x - |x|` on `ℝ`. At `0` the subdifferentials are
/// `∂g1 = [-3, 3]`, `∇g2 = 3`, `∂h = [-1, 1]`: critical, not stationary.
/// The `h` oracle selects `0 ∈ ∂h(0)`.
pub fn counterexample_1d() -> Problem {
    Problem::new(
        "counterexample-1d",
        1,
        Arc::new(L1Norm::new(3.0).expect("positive weight")),
        Arc::new(Quadratic::new(DMatrix::zeros(1, 1), Point::from_vec(vec![3.0]), 0.0).expect("valid")),
        Arc::new(L1Norm::new(1.0).expect("positive weight")),
    )
}
