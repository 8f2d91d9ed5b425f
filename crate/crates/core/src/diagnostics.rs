//! Post-hoc analysis of solver traces.

use serde::{Deserialize, Serialize};

use crate::error::{GppaError, Result};
use crate::solver::{descent_factor, IterationRecord, Status, Trace};

/// Per-step check of `f(x_k) - f(x_{k+1}) ≥ c·‖x_k - x_{k+1}‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub factor: f64,
    pub tolerance: f64,
    /// Gaps recomputed from consecutive recorded values, one per adjacent
    /// pair of records.
    pub gaps: Vec<f64>,
    /// Gap of the last recorded step, whose endpoint is not itself a record.
    pub final_gap: Option<f64>,
    pub min_gap: Option<f64>,
    pub violations: usize,
    pub violating_steps: Vec<usize>,
}

impl DescentReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Default slack `1e-10·(1 + |f(x0)|)`.
pub fn default_descent_tolerance(f0: f64) -> f64 {
    1e-10 * (1.0 + f0.abs())
}

/// Recomputes the descent gaps of a trace with the given `t` and `L`.
pub fn verify_descent_report(trace: &Trace, t: f64, lipschitz: f64, convex_g1: bool) -> DescentReport {
    let factor = descent_factor(t, lipschitz, convex_g1);
    let tolerance = trace.config_echo.descent_tolerance.unwrap_or_else(|| {
        default_descent_tolerance(trace.records.first().map_or(0.0, |r| r.f_value))
    });
    let final_gap = trace
        .records
        .last()
        .map(|r| r.f_value - trace.final_f - factor * r.step_norm * r.step_norm);
    descent_report_from_records(&trace.records, final_gap, factor, tolerance)
}

/// Descent check over bare records. `final_gap` covers the step out of the
/// last record.
pub fn descent_report_from_records(
    records: &[IterationRecord],
    final_gap: Option<f64>,
    factor: f64,
    tolerance: f64,
) -> DescentReport {
    let gaps: Vec<f64> = records
        .windows(2)
        .map(|w| w[0].f_value - w[1].f_value - factor * w[0].step_norm * w[0].step_norm)
        .collect();
    let mut violating_steps: Vec<usize> = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| !(**g >= -tolerance))
        .map(|(i, _)| records[i].k)
        .collect();
    if let (Some(g), Some(last)) = (final_gap, records.last()) {
        if !(g >= -tolerance) {
            violating_steps.push(last.k);
        }
    }
    let min_gap = gaps
        .iter()
        .copied()
        .chain(final_gap)
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))));
    DescentReport {
        factor,
        tolerance,
        gaps,
        final_gap,
        min_gap,
        violations: violating_steps.len(),
        violating_steps,
    }
}

/// `Σ‖x_k - x_{k+1}‖²` against `(1/c)·(f(x0) - min f)` where `c` is the
/// descent constant of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareSumReport {
    pub sum_squares: f64,
    pub bound: f64,
}

impl SquareSumReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.sum_squares <= self.bound + slack
    }
}

pub fn square_summability(trace: &Trace) -> SquareSumReport {
    let sum_squares = trace.records.iter().map(|r| r.step_norm * r.step_norm).sum();
    let f0 = trace.records.first().map_or(trace.final_f, |r| r.f_value);
    let f_min = trace
        .records
        .iter()
        .map(|r| r.f_value)
        .fold(trace.final_f, f64::min);
    let c = trace.descent_constant();
    let bound = if c > 0.0 { (f0 - f_min) / c } else { f64::INFINITY };
    SquareSumReport { sum_squares, bound }
}

/// Convergence regime read off the tail of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Finite,
    Linear,
    Sublinear,
    Inconclusive,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Finite => "finite",
            Regime::Linear => "linear",
            Regime::Sublinear => "sublinear",
            Regime::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: Regime,
    /// Linear factor, `‖x_k - x*‖ ≲ μ qᵏ`.
    pub q: Option<f64>,
    /// Sublinear power, `‖x_k - x*‖ ≲ μ k^exponent`.
    pub exponent: Option<f64>,
    /// KL exponent implied by the regime. Linear fits report `½`, the
    /// largest exponent compatible with linear convergence.
    pub theta_hat: Option<f64>,
    pub fit_r2: f64,
    pub tail_start: usize,
    pub reason: Option<String>,
}

impl RateReport {
    fn inconclusive(reason: impl Into<String>, fit_r2: f64, tail_start: usize) -> Self {
        Self {
            regime: Regime::Inconclusive,
            q: None,
            exponent: None,
            theta_hat: None,
            fit_r2,
            tail_start,
            reason: Some(reason.into()),
        }
    }

    /// Structural consistency of the regime and its parameters.
    pub fn is_consistent(&self) -> bool {
        let r2_ok = (0.0..=1.0).contains(&self.fit_r2);
        r2_ok
            && match self.regime {
                Regime::Finite => self.theta_hat == Some(0.0),
                Regime::Linear => {
                    matches!(self.q, Some(q) if q > 0.0 && q < 1.0)
                        && matches!(self.theta_hat, Some(th) if th > 0.0 && th <= 0.5)
                }
                Regime::Sublinear => {
                    matches!(self.exponent, Some(e) if e < 0.0)
                        && matches!(self.theta_hat, Some(th) if th > 0.5 && th < 1.0)
                }
                Regime::Inconclusive => self.q.is_none() && self.exponent.is_none(),
            }
    }
}

pub const MIN_RECORDS_FOR_RATE: usize = 20;
const MIN_R2: f64 = 0.95;
const TAIL_DROP: usize = 5;

/// Classifies the convergence regime of a converged trace.
///
/// `‖x_k - x*‖` is bounded by the tail sum `Δ_k = Σ_{p ≥ k} ‖x_p - x_{p+1}‖`,
/// truncated at the last record with `x* = final_x`. After dropping the
/// first quarter of the records and the last five, `ln Δ_k` is regressed on
/// `k` for the linear regime and `ln ‖x_k - x_{k+1}‖` on `ln k` for the
/// sublinear one; the better fit wins unless both have `r² < 0.95`. A trace whose last step is exactly zero
/// terminated finitely.
pub fn classify_rate(trace: &Trace) -> RateReport {
    if trace.status != Status::Converged {
        return RateReport::inconclusive(format!("trace status is {}", trace.status.as_str()), 0.0, 0);
    }
    let steps: Vec<f64> = trace.records.iter().map(|r| r.step_norm).collect();
    if steps.last() == Some(&0.0) {
        let first_zero = steps.iter().position(|&s| s == 0.0).unwrap_or(0);
        return RateReport {
            regime: Regime::Finite,
            q: None,
            exponent: None,
            theta_hat: Some(0.0),
            fit_r2: 1.0,
            tail_start: first_zero,
            reason: None,
        };
    }
    let n = steps.len();
    if n < MIN_RECORDS_FOR_RATE {
        return RateReport::inconclusive(
            format!("{n} records, need at least {MIN_RECORDS_FOR_RATE}"),
            0.0,
            0,
        );
    }

    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for k in (0..n).rev() {
        acc += steps[k];
        tail[k] = acc;
    }
    let lo = (n / 4).max(1);
    let hi = n - TAIL_DROP;
    let window: Vec<(f64, f64)> = (lo..hi)
        .filter(|&k| tail[k] > 0.0)
        .map(|k| (k as f64, tail[k].ln()))
        .collect();
    if window.len() < 3 {
        return RateReport::inconclusive("too few positive tail sums to fit", 0.0, lo);
    }

    let linear = fit_line(window.iter().copied());
    // Truncating Δ_k at the last record bends a power law across the whole
    // window, so the sublinear model is fitted to the steps themselves:
    // Δ_k ~ kᵉ  ⇔  ‖x_k - x_{k+1}‖ ~ k^(e-1).
    let mut sublinear = fit_line(
        (lo..hi)
            .filter(|&k| steps[k] > 0.0)
            .map(|k| ((k as f64).ln(), steps[k].ln())),
    );
    sublinear.slope += 1.0;

    let linear_ok = linear.slope < 0.0;
    let sublinear_ok = sublinear.slope < 0.0;
    let best_r2 = [linear_ok.then_some(linear.r2), sublinear_ok.then_some(sublinear.r2)]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
    if best_r2 < MIN_R2 {
        return RateReport::inconclusive(
            format!("best fit r² = {best_r2:.4} below {MIN_R2}"),
            best_r2.clamp(0.0, 1.0),
            lo,
        );
    }
    if linear_ok && (!sublinear_ok || linear.r2 >= sublinear.r2) {
        RateReport {
            regime: Regime::Linear,
            q: Some(linear.slope.exp()),
            exponent: None,
            theta_hat: Some(0.5),
            fit_r2: linear.r2.clamp(0.0, 1.0),
            tail_start: lo,
            reason: None,
        }
    } else {
        let e = sublinear.slope;
        RateReport {
            regime: Regime::Sublinear,
            q: None,
            exponent: Some(e),
            theta_hat: Some((1.0 - e) / (1.0 - 2.0 * e)),
            fit_r2: sublinear.r2.clamp(0.0, 1.0),
            tail_start: lo,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LineFit {
    slope: f64,
    r2: f64,
}

/// Ordinary least squares `y ≈ a x + b`.
fn fit_line(points: impl Iterator<Item = (f64, f64)> + Clone) -> LineFit {
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (x, y) in points.clone() {
        n += 1.0;
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points.clone() {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return LineFit { slope: 0.0, r2: 0.0 };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    LineFit { slope, r2 }
}

/// Growth of the iterate norms over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub initial_norm: f64,
    pub max_norm: f64,
    pub threshold: f64,
    /// Set when some iterate norm exceeds `threshold`.
    pub flagged: bool,
    pub first_exceeding: Option<usize>,
}

pub const DEFAULT_GROWTH_MULTIPLE: f64 = 1e6;

/// Flags traces whose iterate norms exceed `multiple·(‖x0‖ + 1)`, which is
/// evidence that the iterates are unbounded and cluster-point guarantees do
/// not apply. Needs a trace recorded with points.
pub fn boundedness_monitor(trace: &Trace, multiple: Option<f64>) -> Result<BoundednessReport> {
    let multiple = multiple.unwrap_or(DEFAULT_GROWTH_MULTIPLE);
    if !(multiple > 0.0) {
        return Err(GppaError::InvalidParameter(format!(
            "growth multiple must be positive, got {multiple}"
        )));
    }
    let mut norms = Vec::with_capacity(trace.records.len() + 1);
    for r in &trace.records {
        norms.push(r.x.as_ref().ok_or(GppaError::PointsNotRecorded)?.norm());
    }
    norms.push(trace.final_x.norm());
    let initial_norm = norms[0];
    let threshold = multiple * (initial_norm + 1.0);
    let first_exceeding = norms.iter().position(|&v| !(v <= threshold));
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    Ok(BoundednessReport {
        initial_norm,
        max_norm,
        threshold,
        flagged: first_exceeding.is_some(),
        first_exceeding,
    })
}
