//! Projections and proximal operators.
//!
//! Nonconvex projections return a single nearest point. Ties are broken by
//! lowest piece index for unions and by smallest lexicographic point for the
//! parabola region.

use std::fmt;
use std::sync::Arc;

use crate::error::{GppaError, Result};
use crate::model::{ConvexOracle, ExtReal, Point, ProxOracle};

/// Relative slack used by membership tests so that projected points are
/// recognised as members despite rounding.
const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Closed set with a (possibly multivalued) metric projection.
pub trait SetOracle: Send + Sync {
    /// One nearest point of the set.
    fn project(&self, x: &Point) -> Result<Point>;
    fn contains(&self, x: &Point) -> bool;
    fn is_convex(&self) -> bool;
    fn name(&self) -> String;
}

impl fmt::Debug for dyn SetOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SetOracle({})", self.name())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GppaError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Projection onto `{x : ‖x‖ ≤ r}`.
pub fn project_ball(x: &Point, r: f64) -> Result<Point> {
    if !(r > 0.0) {
        return Err(GppaError::InvalidParameter(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    let norm = x.norm();
    if norm <= r {
        Ok(x.clone())
    } else {
        Ok(x * (r / norm))
    }
}

/// Projection onto `{z : ⟨a, z⟩ ≤ β}`. Encode `≥` constraints by negating
/// both `a` and `β`.
pub fn project_halfspace(x: &Point, a: &Point, beta: f64) -> Result<Point> {
    check_len(a.len(), x.len())?;
    let a2 = a.norm_squared();
    if a2 == 0.0 {
        return Err(GppaError::ZeroNormal);
    }
    let excess = a.dot(x) - beta;
    if excess <= 0.0 {
        Ok(x.clone())
    } else {
        Ok(x - a * (excess / a2))
    }
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(x: &Point, lo: &Point, hi: &Point) -> Result<Point> {
    check_len(lo.len(), x.len())?;
    check_len(hi.len(), x.len())?;
    check_box(lo, hi)?;
    Ok(Point::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i])))
}

fn check_box(lo: &Point, hi: &Point) -> Result<()> {
    for i in 0..lo.len() {
        if !(lo[i] <= hi[i]) {
            return Err(GppaError::InvertedBox {
                index: i,
                lo: lo[i],
                hi: hi[i],
            });
        }
    }
    Ok(())
}

/// Nearest of the per-piece projections; ties go to the lowest index.
pub fn project_union(pieces: &[Arc<dyn SetOracle>], x: &Point) -> Result<Point> {
    let mut best: Option<(f64, Point)> = None;
    for piece in pieces {
        let p = piece.project(x)?;
        let d = (x - &p).norm_squared();
        match &best {
            Some((bd, _)) if d >= *bd => {}
            _ => best = Some((d, p)),
        }
    }
    best.map(|(_, p)| p).ok_or(GppaError::EmptyUnion)
}

/// Nearest point of `{(x₁, x₂) : x₂ ≤ α x₁²}`.
///
/// For an infeasible `x` the nearest point is `(s, α s²)` where `s` is a
/// real root of `2α² s³ + (1 - 2α x₂) s - x₁`, the derivative of the squared
/// distance along the boundary. Roots are isolated on the monotone pieces of
/// the cubic and refined by bisection; the closest candidate wins. `α = 0`
/// is the halfspace `x₂ ≤ 0`.
pub fn project_parabola_region(x: &Point, alpha: f64) -> Result<Point> {
    check_len(2, x.len())?;
    if !alpha.is_finite() {
        return Err(GppaError::InvalidParameter(format!(
            "parabola coefficient must be finite, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return project_halfspace(x, &Point::from_vec(vec![0.0, 1.0]), 0.0);
    }
    let (x1, x2) = (x[0], x[1]);
    if x2 <= alpha * x1 * x1 {
        return Ok(x.clone());
    }

    let c3 = 2.0 * alpha * alpha;
    let c1 = 1.0 - 2.0 * alpha * x2;
    let c0 = -x1;
    let roots = cubic_real_roots(c3, c1, c0);

    let mut best: Option<(f64, f64)> = None; // (squared distance, s)
    for s in roots {
        let d = (s - x1).powi(2) + (alpha * s * s - x2).powi(2);
        best = match best {
            None => Some((d, s)),
            Some((bd, bs)) => {
                let tie = (d - bd).abs() <= 1e-14 * bd.max(1.0);
                if (tie && s < bs) || (!tie && d < bd) {
                    Some((d, s))
                } else {
                    Some((bd, bs))
                }
            }
        };
    }
    // A depressed cubic with positive leading coefficient always has a root.
    let (_, s) = best.expect("cubic has at least one real root");
    Ok(Point::from_vec(vec![s, alpha * s * s]))
}

/// Real roots of `c3 s³ + c1 s + c0` with `c3 > 0`, by bisection on each
/// monotone interval.
fn cubic_real_roots(c3: f64, c1: f64, c0: f64) -> Vec<f64> {
    let p = |s: f64| (c3 * s * s + c1) * s + c0;
    let bound = 1.0 + c1.abs().max(c0.abs()) / c3;
    let mut breaks = vec![-bound];
    if c1 < 0.0 {
        let crit = (-c1 / (3.0 * c3)).sqrt();
        breaks.push(-crit);
        breaks.push(crit);
    }
    breaks.push(bound);

    let mut roots = Vec::with_capacity(3);
    for w in breaks.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut plo, phi) = (p(lo), p(hi));
        if plo == 0.0 {
            roots.push(lo);
            continue;
        }
        if phi == 0.0 {
            roots.push(hi);
            continue;
        }
        if plo.signum() == phi.signum() {
            continue;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = p(mid);
            if pm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if pm.signum() == plo.signum() {
                lo = mid;
                plo = pm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

/// `prox_t` of `c‖·‖₁`: `sign(xᵢ)·max(|xᵢ| - c/t, 0)`.
pub fn soft_threshold(x: &Point, c: f64, t: f64) -> Result<Point> {
    if !(c >= 0.0) || !(t > 0.0) {
        return Err(GppaError::InvalidParameter(format!(
            "soft threshold needs c >= 0 and t > 0, got c = {c}, t = {t}"
        )));
    }
    let k = c / t;
    Ok(x.map(|v| v.signum() * (v.abs() - k).max(0.0)))
}

/// The prox of an indicator is the projection; `t` only gets validated.
pub fn prox_of_indicator(set: &dyn SetOracle, z: &Point, t: f64) -> Result<Point> {
    if !(t > 0.0) {
        return Err(GppaError::InvalidParameter(format!(
            "prox scale must be positive, got {t}"
        )));
    }
    set.project(z)
}

/// Euclidean ball `‖x - center‖ ≤ radius`.
#[derive(Debug, Clone)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(Point::zeros(dim), radius)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &Point {
        &self.center
    }
}

impl SetOracle for Ball {
    fn project(&self, x: &Point) -> Result<Point> {
        check_len(self.center.len(), x.len())?;
        if self.contains(x) {
            return Ok(x.clone());
        }
        Ok(&self.center + project_ball(&(x - &self.center), self.radius)?)
    }

    fn contains(&self, x: &Point) -> bool {
        x.len() == self.center.len()
            && (x - &self.center).norm() <= self.radius * (1.0 + MEMBERSHIP_SLACK)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!("ball(r={})", self.radius)
    }
}

/// Halfspace `⟨normal, x⟩ ≤ offset`.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    normal: Point,
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        if normal.norm_squared() == 0.0 {
            return Err(GppaError::ZeroNormal);
        }
        Ok(Self { normal, offset })
    }

    /// `⟨normal, x⟩ ≥ offset`.
    pub fn at_least(normal: Point, offset: f64) -> Result<Self> {
        Self::new(-normal, -offset)
    }
}

impl SetOracle for HalfSpace {
    fn project(&self, x: &Point) -> Result<Point> {
        if self.contains(x) {
            return Ok(x.clone());
        }
        project_halfspace(x, &self.normal, self.offset)
    }

    fn contains(&self, x: &Point) -> bool {
        if x.len() != self.normal.len() {
            return false;
        }
        let scale = self.offset.abs().max(self.normal.norm() * x.norm()).max(1.0);
        self.normal.dot(x) - self.offset <= MEMBERSHIP_SLACK * scale
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "halfspace".into()
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct BoxSet {
    lo: Point,
    hi: Point,
}

impl BoxSet {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        check_len(lo.len(), hi.len())?;
        check_box(&lo, &hi)?;
        Ok(Self { lo, hi })
    }
}

impl SetOracle for BoxSet {
    fn project(&self, x: &Point) -> Result<Point> {
        project_box(x, &self.lo, &self.hi)
    }

    fn contains(&self, x: &Point) -> bool {
        x.len() == self.lo.len()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| self.lo[i] <= v && v <= self.hi[i])
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "box".into()
    }
}

/// A single point.
#[derive(Debug, Clone)]
pub struct Singleton {
    point: Point,
}

impl Singleton {
    pub fn new(point: Point) -> Self {
        Self { point }
    }
}

impl SetOracle for Singleton {
    fn project(&self, x: &Point) -> Result<Point> {
        check_len(self.point.len(), x.len())?;
        Ok(self.point.clone())
    }

    fn contains(&self, x: &Point) -> bool {
        x == &self.point
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "point".into()
    }
}

/// Region below a parabola, `x₂ ≤ α x₁²`. Nonconvex for `α > 0`.
#[derive(Debug, Clone, Copy)]
pub struct ParabolaRegion {
    alpha: f64,
}

impl ParabolaRegion {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "parabola coefficient must be finite, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl SetOracle for ParabolaRegion {
    fn project(&self, x: &Point) -> Result<Point> {
        project_parabola_region(x, self.alpha)
    }

    fn contains(&self, x: &Point) -> bool {
        x.len() == 2 && x[1] <= self.alpha * x[0] * x[0]
    }

    fn is_convex(&self) -> bool {
        self.alpha <= 0.0
    }

    fn name(&self) -> String {
        format!("parabola(alpha={})", self.alpha)
    }
}

/// Finite union of closed sets. Convex only in the single-piece case.
#[derive(Clone)]
pub struct Union {
    pieces: Vec<Arc<dyn SetOracle>>,
}

impl Union {
    pub fn new(pieces: Vec<Arc<dyn SetOracle>>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(GppaError::EmptyUnion);
        }
        Ok(Self { pieces })
    }
}

impl fmt::Debug for Union {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.pieces.iter().map(|p| p.name())).finish()
    }
}

impl SetOracle for Union {
    fn project(&self, x: &Point) -> Result<Point> {
        project_union(&self.pieces, x)
    }

    fn contains(&self, x: &Point) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }

    fn is_convex(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].is_convex()
    }

    fn name(&self) -> String {
        let names: Vec<_> = self.pieces.iter().map(|p| p.name()).collect();
        format!("union[{}]", names.join(", "))
    }
}

/// `δ(·; Ω)` as a prox oracle.
#[derive(Clone)]
pub struct Indicator {
    set: Arc<dyn SetOracle>,
}

impl Indicator {
    pub fn new(set: Arc<dyn SetOracle>) -> Self {
        Self { set }
    }

    pub fn set(&self) -> &dyn SetOracle {
        self.set.as_ref()
    }
}

impl ProxOracle for Indicator {
    fn evaluate(&self, x: &Point) -> ExtReal {
        if self.set.contains(x) {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInfinity
        }
    }

    fn prox(&self, z: &Point, t: f64) -> Result<Point> {
        prox_of_indicator(self.set.as_ref(), z, t)
    }

    fn domain_hint(&self, x: &Point) -> Option<bool> {
        Some(self.set.contains(x))
    }

    fn is_convex(&self) -> bool {
        self.set.is_convex()
    }
}

/// `c‖x‖₁`. As a [`ConvexOracle`] the subgradient selection is
/// `c·sign(xᵢ)` with `0` at kinks.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    weight: f64,
}

impl L1Norm {
    pub fn new(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "l1 weight must be nonnegative, got {weight}"
            )));
        }
        Ok(Self { weight })
    }

    fn value(&self, x: &Point) -> f64 {
        self.weight * x.lp_norm(1)
    }
}

impl ProxOracle for L1Norm {
    fn evaluate(&self, x: &Point) -> ExtReal {
        ExtReal::Finite(self.value(x))
    }

    fn prox(&self, z: &Point, t: f64) -> Result<Point> {
        soft_threshold(z, self.weight, t)
    }

    fn domain_hint(&self, _x: &Point) -> Option<bool> {
        Some(true)
    }

    fn is_convex(&self) -> bool {
        true
    }
}

impl ConvexOracle for L1Norm {
    fn evaluate(&self, x: &Point) -> f64 {
        self.value(x)
    }

    fn subgradient(&self, x: &Point) -> Point {
        x.map(|v| if v == 0.0 { 0.0 } else { self.weight * v.signum() })
    }
}

/// `½ s‖u‖² + ⟨c, u⟩ + δ(u; Ω)` with `s ≥ 0`.
///
/// The quadratic part is isotropic, so the prox is the projection of the
/// unconstrained minimizer `(t z - c) / (t + s)` onto `Ω`.
#[derive(Clone)]
pub struct IsotropicQuadraticOnSet {
    scale: f64,
    linear: Point,
    set: Arc<dyn SetOracle>,
}

impl IsotropicQuadraticOnSet {
    pub fn new(scale: f64, linear: Point, set: Arc<dyn SetOracle>) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(GppaError::InvalidParameter(format!(
                "quadratic scale must be nonnegative, got {scale}"
            )));
        }
        Ok(Self { scale, linear, set })
    }
}

impl ProxOracle for IsotropicQuadraticOnSet {
    fn evaluate(&self, x: &Point) -> ExtReal {
        if !self.set.contains(x) {
            return ExtReal::PosInfinity;
        }
        ExtReal::Finite(0.5 * self.scale * x.norm_squared() + self.linear.dot(x))
    }

    fn prox(&self, z: &Point, t: f64) -> Result<Point> {
        if !(t > 0.0) {
            return Err(GppaError::InvalidParameter(format!(
                "prox scale must be positive, got {t}"
            )));
        }
        check_len(self.linear.len(), z.len())?;
        let w = (z * t - &self.linear) / (t + self.scale);
        self.set.project(&w)
    }

    fn domain_hint(&self, x: &Point) -> Option<bool> {
        Some(self.set.contains(x))
    }

    fn is_convex(&self) -> bool {
        self.set.is_convex()
    }
}
