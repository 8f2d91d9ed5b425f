//! The GPPA iteration.
//!
//! ```text
//! y_k      ∈ ∂h(x_k)
//! x_{k+1}  = prox_t^{g1}( x_k - (∇g2(x_k) - y_k) / t )
//! stop when ‖x_k - x_{k+1}‖ ≤ ε
//! ```
//!
//! Every iteration is checked against the sufficient-decrease bound
//! `f(x_k) - f(x_{k+1}) ≥ c·‖x_k - x_{k+1}‖²` with `c = (t - L)/2`, or
//! `c = t - L/2` when `g1` is convex and the relaxed stepsize rule is on.
//! A violation beyond the configured slack means one of the oracles breaks
//! its contract (typically an understated `L`) and the run is aborted.

use serde::{Deserialize, Serialize};

use crate::error::{GppaError, Result};
use crate::model::{Point, Problem};

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularization parameter; must exceed `L` (or `L/2`, see
    /// `g1_convex_stepsize`).
    pub t: f64,
    /// Stop once `‖x_k - x_{k+1}‖ ≤ epsilon`.
    pub epsilon: f64,
    /// Upper bound on the number of recorded iterations.
    pub max_iters: usize,
    /// Allow `t > L/2` when `g1` is convex.
    pub g1_convex_stepsize: bool,
    /// Slack on the descent inequality. `None` resolves to
    /// `1e-10·(1 + |f(x0)|)` at the start of a run.
    pub descent_tolerance: Option<f64>,
    pub record_full_points: bool,
    /// Use `‖x_k - x_{k+1}‖ ≤ epsilon·(1 + ‖x_k‖)` instead of the absolute
    /// criterion.
    pub relative_stop: bool,
}

impl SolverConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-8;
    pub const DEFAULT_MAX_ITERS: usize = 100_000;

    pub fn new(t: f64) -> Self {
        Self {
            t,
            epsilon: Self::DEFAULT_EPSILON,
            max_iters: Self::DEFAULT_MAX_ITERS,
            g1_convex_stepsize: false,
            descent_tolerance: None,
            record_full_points: false,
            relative_stop: false,
        }
    }

    /// `t = 1.5·L` (or `t = 1` when `L = 0`).
    pub fn for_problem(problem: &Problem) -> Self {
        Self::new(default_t(problem.lipschitz(), 1.5))
    }

    /// `t = 0.75·L` with the relaxed stepsize rule enabled.
    pub fn convex_for_problem(problem: &Problem) -> Self {
        Self {
            g1_convex_stepsize: true,
            ..Self::new(default_t(problem.lipschitz(), 0.75))
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_points(mut self, record: bool) -> Self {
        self.record_full_points = record;
        self
    }

    pub fn with_descent_tolerance(mut self, tol: f64) -> Self {
        self.descent_tolerance = Some(tol);
        self
    }

    /// True when the run may use the `t > L/2` rule.
    pub fn relaxed_for(&self, problem: &Problem) -> bool {
        self.g1_convex_stepsize && problem.g1().is_convex()
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(GppaError::InvalidParameter("max_iters must be positive".into()));
        }
        if let Some(tol) = self.descent_tolerance {
            if !(tol >= 0.0) {
                return Err(GppaError::InvalidParameter(format!(
                    "descent_tolerance must be nonnegative, got {tol}"
                )));
            }
        }
        let l = problem.lipschitz();
        if !self.t.is_finite() || self.t <= 0.0 {
            return Err(GppaError::Stepsize {
                t: self.t,
                lipschitz: l,
                rule: "t > 0",
            });
        }
        if self.relaxed_for(problem) {
            if self.t <= 0.5 * l {
                return Err(GppaError::Stepsize {
                    t: self.t,
                    lipschitz: l,
                    rule: "t > L/2",
                });
            }
        } else if self.t <= l {
            return Err(GppaError::Stepsize {
                t: self.t,
                lipschitz: l,
                rule: "t > L",
            });
        }
        Ok(())
    }
}

fn default_t(l: f64, ratio: f64) -> f64 {
    if l > 0.0 {
        ratio * l
    } else {
        1.0
    }
}

/// Constant in the per-step decrease bound: `(t - L)/2`, or `t - L/2` under
/// the convex-`g1` rule.
pub fn descent_factor(t: f64, lipschitz: f64, convex_g1: bool) -> f64 {
    if convex_g1 {
        t - 0.5 * lipschitz
    } else {
        0.5 * (t - lipschitz)
    }
}

/// Outcome of one GPPA step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub x_next: Point,
    /// The subgradient `y ∈ ∂h(x)` used for the step.
    pub y: Point,
    pub step_norm: f64,
}

/// One iteration from `x` with parameter `t`.
pub fn gppa_step(problem: &Problem, x: &Point, t: f64) -> Result<Step> {
    problem.check_dim(x)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(GppaError::InvalidParameter(format!(
            "stepsize must be positive, got {t}"
        )));
    }
    let oracle = |message: String| GppaError::Oracle {
        iteration: 0,
        message,
    };
    let y = problem.h().subgradient(x);
    let grad = problem.g2().gradient(x);
    if y.len() != x.len() || grad.len() != x.len() {
        return Err(oracle("subgradient or gradient has wrong dimension".into()));
    }
    if !y.iter().chain(grad.iter()).all(|v| v.is_finite()) {
        return Err(oracle("non-finite subgradient or gradient".into()));
    }
    let z = x - (grad - &y) / t;
    let x_next = problem.g1().prox(&z, t)?;
    if x_next.len() != x.len() || !x_next.iter().all(|v| v.is_finite()) {
        return Err(oracle("prox returned an invalid point".into()));
    }
    let step_norm = (x - &x_next).norm();
    Ok(Step {
        x_next,
        y,
        step_norm,
    })
}

/// Displacement `‖x - T(x)‖` of one GPPA step at `x`.
///
/// Zero means `x` is a fixed point, so the selected `y ∈ ∂h(x)` satisfies
/// `y - ∇g2(x) ∈ ∂g1(x)` and `x` is critical. The converse does not hold:
/// a critical point certified by a different subgradient than the oracle's
/// selection can have a positive residual.
pub fn criticality_residual(problem: &Problem, x: &Point, t: f64) -> Result<f64> {
    problem.check_dim(x)?;
    if !problem.in_domain(x) {
        return Err(GppaError::NotInDomain);
    }
    Ok(gppa_step(problem, x, t)?.step_norm)
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    DescentViolation,
    OracleError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::DescentViolation => "descent_violation",
            Status::OracleError => "oracle_error",
        }
    }
}

/// One row of the audit trail. Record `k` describes the move from `x_k` to
/// `x_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `f(x_k)`.
    pub f_value: f64,
    /// `‖x_k - x_{k+1}‖`.
    pub step_norm: f64,
    /// `f(x_k) - f(x_{k+1}) - c·step_norm²`.
    pub descent_gap: f64,
    /// Residual at `x_{k+1}`, i.e. the length of the following step.
    pub criticality_residual: f64,
    /// `x_k`, when points are recorded.
    pub x: Option<Point>,
}

/// Full record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub final_x: Point,
    pub final_f: f64,
    pub status: Status,
    /// Configuration with every default resolved.
    pub config_echo: SolverConfig,
    pub problem_name: String,
    pub lipschitz: f64,
    /// Whether the `t - L/2` constant was used for the descent check.
    pub relaxed_stepsize: bool,
    pub message: Option<String>,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_step_norm(&self) -> Option<f64> {
        self.records.last().map(|r| r.step_norm)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.criticality_residual)
    }

    pub fn descent_constant(&self) -> f64 {
        descent_factor(self.config_echo.t, self.lipschitz, self.relaxed_stepsize)
    }
}

/// Runs GPPA from `x0` until the step norm drops below `epsilon`, the
/// iteration cap is hit, or a descent violation is detected.
pub fn run_gppa(problem: &Problem, x0: &Point, config: &SolverConfig) -> Result<Trace> {
    problem.check_dim(x0)?;
    config.validate(problem)?;
    let f0 = problem
        .evaluate_objective(x0)?
        .finite()
        .ok_or(GppaError::NotInDomain)?;

    let lipschitz = problem.lipschitz();
    let relaxed = config.relaxed_for(problem);
    let factor = descent_factor(config.t, lipschitz, relaxed);
    let tol = config
        .descent_tolerance
        .unwrap_or(1e-10 * (1.0 + f0.abs()));
    let echo = SolverConfig {
        descent_tolerance: Some(tol),
        ..*config
    };
    let t = config.t;

    let mut trace = Trace {
        records: Vec::new(),
        final_x: x0.clone(),
        final_f: f0,
        status: Status::OracleError,
        config_echo: echo,
        problem_name: problem.name().to_string(),
        lipschitz,
        relaxed_stepsize: relaxed,
        message: None,
    };

    let mut x = x0.clone();
    let mut fx = f0;
    let mut step = match gppa_step(problem, &x, t) {
        Ok(s) => s,
        Err(e) => {
            trace.message = Some(with_iteration(e, 0).to_string());
            return Ok(trace);
        }
    };

    let mut k = 0;
    loop {
        let f_next = match problem.evaluate_objective(&step.x_next)?.finite() {
            Some(v) => v,
            None => {
                trace.status = Status::OracleError;
                trace.message = Some(format!("iteration {k}: prox left dom g1"));
                break;
            }
        };
        let lookahead = gppa_step(problem, &step.x_next, t);
        let residual = lookahead.as_ref().map_or(f64::NAN, |s| s.step_norm);
        let gap = fx - f_next - factor * step.step_norm * step.step_norm;

        trace.records.push(IterationRecord {
            k,
            f_value: fx,
            step_norm: step.step_norm,
            descent_gap: gap,
            criticality_residual: residual,
            x: config.record_full_points.then(|| x.clone()),
        });
        trace.final_x = step.x_next.clone();
        trace.final_f = f_next;

        if !(gap >= -tol) {
            trace.status = Status::DescentViolation;
            trace.message = Some(format!(
                "iteration {k}: descent gap {gap:e} below -{tol:e}; check the declared L"
            ));
            log::warn!("{}: {}", problem.name(), trace.message.as_deref().unwrap_or(""));
            break;
        }
        let threshold = if config.relative_stop {
            config.epsilon * (1.0 + x.norm())
        } else {
            config.epsilon
        };
        if step.step_norm <= threshold {
            trace.status = Status::Converged;
            break;
        }
        let next = match lookahead {
            Ok(s) => s,
            Err(e) => {
                trace.status = Status::OracleError;
                trace.message = Some(with_iteration(e, k + 1).to_string());
                break;
            }
        };
        k += 1;
        if k >= config.max_iters {
            trace.status = Status::MaxIters;
            break;
        }
        x = step.x_next;
        fx = f_next;
        step = next;
    }
    log::debug!(
        "{}: {} after {} iterations, f = {}",
        problem.name(),
        trace.status.as_str(),
        trace.records.len(),
        trace.final_f
    );
    Ok(trace)
}

fn with_iteration(err: GppaError, iteration: usize) -> GppaError {
    match err {
        GppaError::Oracle { message, .. } => GppaError::Oracle { iteration, message },
        other => GppaError::Oracle {
            iteration,
            message: other.to_string(),
        },
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(GppaError::MalformedInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Result<Self> {
        Self::new(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn shift(self, by: f64) -> Self {
        Self {
            lo: self.lo + by,
            hi: self.hi + by,
        }
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) <= self.hi.min(other.hi)
    }
}

/// Stationarity versus criticality of a scalar point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    /// `∂h ⊆ ∂g1 + ∇g2`.
    Stationary,
    /// The sets meet but `∂h` is not contained.
    CriticalNotStationary,
    NotCritical,
}

/// Classifies a point of a one-dimensional problem from the subdifferential
/// intervals of `g1` and `h` and the derivative of `g2`.
pub fn check_criticality_1d(g1_sub: Interval, g2_grad: f64, h_sub: Interval) -> Result<Criticality> {
    if !g2_grad.is_finite() {
        return Err(GppaError::InvalidParameter(format!(
            "derivative of g2 must be finite, got {g2_grad}"
        )));
    }
    let left = g1_sub.shift(g2_grad);
    Ok(if left.contains_interval(&h_sub) {
        Criticality::Stationary
    } else if left.intersects(&h_sub) {
        Criticality::CriticalNotStationary
    } else {
        Criticality::NotCritical
    })
}
