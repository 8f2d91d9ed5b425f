//! Problem model `f = g1 + g2 - h` built from three oracle bundles.
//!
//! * [`ProxOracle`] holds `g1`, which may be nonconvex and take the value
//!   `+∞`; the solver only touches it through `evaluate` and `prox`.
//! * [`SmoothOracle`] holds `g2` together with the Lipschitz modulus `L` of
//!   its gradient. `L` is declared by whoever builds the oracle.
//! * [`ConvexOracle`] holds the finite convex `h` and a deterministic
//!   selection from its subdifferential.
//!
//! Oracles are immutable once built and `Send + Sync`, so a [`Problem`] can
//! be shared by concurrent solver runs.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GppaError, Result};

/// Dense point of `ℝⁿ`.
pub type Point = DVector<f64>;

/// Value in `ℝ ∪ {+∞}`.
///
/// Infinity is a separate variant so that descent comparisons never run
/// float infinities through subtraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInfinity => None,
        }
    }

    /// Adds a finite real; `+∞` absorbs it.
    pub fn plus(self, v: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + v),
            ExtReal::PosInfinity => ExtReal::PosInfinity,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

/// The prox-capable part `g1`.
pub trait ProxOracle: Send + Sync {
    fn evaluate(&self, x: &Point) -> ExtReal;

    /// One member of `argmin_u { g1(u) + (t/2)‖u - z‖² }`. Must be
    /// deterministic when the argmin is a set.
    fn prox(&self, z: &Point, t: f64) -> Result<Point>;

    /// Cheap membership test for `dom g1`, when one exists.
    fn domain_hint(&self, _x: &Point) -> Option<bool> {
        None
    }

    fn is_convex(&self) -> bool;
}

/// The smooth part `g2` with `L`-Lipschitz gradient.
pub trait SmoothOracle: Send + Sync {
    fn evaluate(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn lipschitz(&self) -> f64;
}

/// The finite convex part `h`.
pub trait ConvexOracle: Send + Sync {
    fn evaluate(&self, x: &Point) -> f64;

    /// A deterministic element of `∂h(x)`.
    fn subgradient(&self, x: &Point) -> Point;

    /// Lipschitz modulus of `∇h` when `h` is differentiable.
    fn gradient_lipschitz(&self) -> Option<f64> {
        None
    }
}

/// `f = g1 + g2 - h` on `ℝⁿ` with a fixed dimension.
#[derive(Clone)]
pub struct Problem {
    name: String,
    dim: usize,
    g1: Arc<dyn ProxOracle>,
    g2: Arc<dyn SmoothOracle>,
    h: Arc<dyn ConvexOracle>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.g2.lipschitz())
            .field("g1_convex", &self.g1.is_convex())
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        g1: Arc<dyn ProxOracle>,
        g2: Arc<dyn SmoothOracle>,
        h: Arc<dyn ConvexOracle>,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            g1,
            g2,
            h,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn g1(&self) -> &dyn ProxOracle {
        self.g1.as_ref()
    }

    pub fn g2(&self) -> &dyn SmoothOracle {
        self.g2.as_ref()
    }

    pub fn h(&self) -> &dyn ConvexOracle {
        self.h.as_ref()
    }

    /// Lipschitz modulus `L` of `∇g2`.
    pub fn lipschitz(&self) -> f64 {
        self.g2.lipschitz()
    }

    pub fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim {
            return Err(GppaError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `x ∈ dom f`, which is `dom g1`.
    pub fn in_domain(&self, x: &Point) -> bool {
        self.g1.evaluate(x).is_finite()
    }

    /// `f(x) = g1(x) + g2(x) - h(x)`, or `+∞` outside `dom g1`.
    pub fn evaluate_objective(&self, x: &Point) -> Result<ExtReal> {
        self.check_dim(x)?;
        Ok(self
            .g1
            .evaluate(x)
            .plus(self.g2.evaluate(x) - self.h.evaluate(x)))
    }
}

/// Free-function form of [`Problem::evaluate_objective`].
pub fn evaluate_objective(problem: &Problem, x: &Point) -> Result<ExtReal> {
    problem.evaluate_objective(x)
}

/// The zero function on `ℝⁿ`. Usable as any of the three parts.
#[derive(Debug, Clone, Copy)]
pub struct Zero;

impl ProxOracle for Zero {
    fn evaluate(&self, _x: &Point) -> ExtReal {
        ExtReal::Finite(0.0)
    }

    fn prox(&self, z: &Point, _t: f64) -> Result<Point> {
        Ok(z.clone())
    }

    fn domain_hint(&self, _x: &Point) -> Option<bool> {
        Some(true)
    }

    fn is_convex(&self) -> bool {
        true
    }
}

impl SmoothOracle for Zero {
    fn evaluate(&self, _x: &Point) -> f64 {
        0.0
    }

    fn gradient(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

impl ConvexOracle for Zero {
    fn evaluate(&self, _x: &Point) -> f64 {
        0.0
    }

    fn subgradient(&self, x: &Point) -> Point {
        Point::zeros(x.len())
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `q(x) = ½ xᵀQx + cᵀx` with symmetric `Q`.
///
/// As a [`SmoothOracle`] the declared Lipschitz constant is used verbatim,
/// which lets tests build deliberately inconsistent oracles. As a
/// [`ConvexOracle`] the caller is responsible for `Q ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    c: Point,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, c: Point, lipschitz: f64) -> Result<Self> {
        check_symmetric(&q)?;
        if q.nrows() != c.len() {
            return Err(GppaError::DimensionMismatch {
                expected: q.nrows(),
                found: c.len(),
            });
        }
        if !(lipschitz >= 0.0) {
            return Err(GppaError::InvalidParameter(format!(
                "Lipschitz constant must be nonnegative, got {lipschitz}"
            )));
        }
        Ok(Self { q, c, lipschitz })
    }

    /// Same as [`Quadratic::new`] with `L = ‖Q‖₂` from power iteration.
    pub fn with_spectral_lipschitz(q: DMatrix<f64>, c: Point) -> Result<Self> {
        let upper = estimate_symmetric_max_eigenvalue(&q, 1e-12)?;
        let lower = -estimate_symmetric_max_eigenvalue(&(-&q), 1e-12)?;
        let l = upper.abs().max(lower.abs());
        Self::new(q, c, l)
    }

    /// `½ s‖x‖² + cᵀx`, `L = |s|`.
    pub fn isotropic(scale: f64, c: Point) -> Self {
        let n = c.len();
        Self {
            q: DMatrix::identity(n, n) * scale,
            c,
            lipschitz: scale.abs(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear(&self) -> &Point {
        &self.c
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn grad(&self, x: &Point) -> Point {
        &self.q * x + &self.c
    }
}

impl SmoothOracle for Quadratic {
    fn evaluate(&self, x: &Point) -> f64 {
        self.value(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        self.grad(x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl ConvexOracle for Quadratic {
    fn evaluate(&self, x: &Point) -> f64 {
        self.value(x)
    }

    fn subgradient(&self, x: &Point) -> Point {
        self.grad(x)
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(GppaError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let scale = a.amax().max(1.0);
    let mut asymmetry = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            asymmetry = asymmetry.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if !asymmetry.is_finite() || asymmetry > 1e-12 * scale {
        return Err(GppaError::NotSymmetric { asymmetry });
    }
    Ok(())
}

const EIGEN_MAX_ITERS: usize = 100_000;
const EIGEN_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Largest eigenvalue of a symmetric matrix by shifted power iteration.
///
/// The matrix is shifted by its Gershgorin lower bound so that the
/// dominant eigenvalue is the largest one. The start vector comes from a
/// fixed-seed generator, so the result is deterministic. Iteration stops
/// once the Rayleigh residual `‖Bv - ρv‖` is below `tol·max(1, |λ̂|)`.
pub fn estimate_symmetric_max_eigenvalue(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(GppaError::InvalidParameter(format!(
            "eigenvalue tolerance must be positive, got {tol}"
        )));
    }
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(GppaError::InvalidParameter("empty matrix".into()));
    }

    let gershgorin_low = (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            a[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min);
    let shift = (-gershgorin_low).max(0.0);
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut v = Point::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
    v /= v.norm();

    let mut estimate = f64::NAN;
    for _ in 0..EIGEN_MAX_ITERS {
        let w = &b * &v;
        let rayleigh = v.dot(&w);
        estimate = rayleigh - shift;
        let residual = (&w - &v * rayleigh).norm();
        if residual <= tol * estimate.abs().max(1.0) {
            return Ok(estimate);
        }
        let norm = w.norm();
        if norm == 0.0 {
            // B v = 0 on a PSD B means every eigenvalue of B is zero.
            return Ok(-shift);
        }
        v = w / norm;
    }
    Err(GppaError::EigenNotConverged {
        best_estimate: estimate,
        iterations: EIGEN_MAX_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn quadratic_problem() -> Problem {
        Problem::new(
            "half-norm",
            2,
            Arc::new(Zero),
            Arc::new(Quadratic::isotropic(1.0, Point::zeros(2))),
            Arc::new(Zero),
        )
    }

    #[test]
    fn objective_of_half_squared_norm() {
        let p = quadratic_problem();
        let f = p.evaluate_objective(&Point::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(f, ExtReal::Finite(12.5));
    }

    #[test]
    fn objective_rejects_wrong_dimension() {
        let p = quadratic_problem();
        let err = p.evaluate_objective(&Point::zeros(3)).unwrap_err();
        assert_eq!(
            err,
            GppaError::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn ext_real_absorbs_infinity() {
        assert_eq!(ExtReal::PosInfinity.plus(-1e300), ExtReal::PosInfinity);
        assert_eq!(ExtReal::Finite(1.0).plus(2.0).finite(), Some(3.0));
    }

    #[test]
    fn eigen_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let tol = 1e-10;
        assert_close(estimate_symmetric_max_eigenvalue(&a, tol).unwrap(), 2.0, 2.0 * tol);
    }

    #[test]
    fn eigen_swap_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let tol = 1e-10;
        assert_close(estimate_symmetric_max_eigenvalue(&a, tol).unwrap(), 1.0, tol);
    }

    #[test]
    fn eigen_negative_definite_and_zero() {
        let a = -DMatrix::<f64>::identity(3, 3);
        assert_close(estimate_symmetric_max_eigenvalue(&a, 1e-12).unwrap(), -1.0, 1e-12);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_close(estimate_symmetric_max_eigenvalue(&z, 1e-12).unwrap(), 0.0, 1e-12);
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            estimate_symmetric_max_eigenvalue(&a, 1e-8),
            Err(GppaError::NotSymmetric { .. })
        ));
        let r = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            estimate_symmetric_max_eigenvalue(&r, 1e-8),
            Err(GppaError::NotSquare { .. })
        ));
    }

    #[test]
    fn quadratic_spectral_lipschitz() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]);
        let quad = Quadratic::with_spectral_lipschitz(q, Point::zeros(2)).unwrap();
        assert_close(SmoothOracle::lipschitz(&quad), 3.0, 1e-9);
    }
}
