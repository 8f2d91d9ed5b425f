use thiserror::Error;

/// Errors raised by oracles, the solver, and the problem builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GppaError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigenvalue iteration did not converge after {iterations} iterations (best estimate {best_estimate})")]
    EigenNotConverged { best_estimate: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("halfspace normal vector is zero")]
    ZeroNormal,

    #[error("box bounds inverted at coordinate {index}: lo = {lo} > hi = {hi}")]
    InvertedBox { index: usize, lo: f64, hi: f64 },

    #[error("union of sets must contain at least one piece")]
    EmptyUnion,

    #[error("malformed interval [{lo}, {hi}]")]
    MalformedInterval { lo: f64, hi: f64 },

    #[error("point lies outside dom g1")]
    NotInDomain,

    #[error("stepsize t = {t} violates {rule} (L = {lipschitz})")]
    Stepsize { t: f64, lipschitz: f64, rule: &'static str },

    #[error("rho = {rho} does not make rho*I - A positive semidefinite (lambda_max(A) ~ {lambda_max})")]
    NotPsdShift { rho: f64, lambda_max: f64 },

    #[error("oracle failure at iteration {iteration}: {message}")]
    Oracle { iteration: usize, message: String },

    #[error("problem requires n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("iterate points were not recorded; enable record_full_points")]
    PointsNotRecorded,
}

pub type Result<T> = std::result::Result<T, GppaError>;
