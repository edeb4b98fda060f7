//! Huber functionals, quantiles and expectiles of a distribution.
//!
//! The Huber functional `H^α_{a,b}(F)` is the zero set of
//!
//! ```text
//! G(u) = (1-α) ∫_{u-b}^{u} F(t) dt - α ∫_{u}^{u+a} (1 - F(t)) dt,
//! ```
//!
//! a continuous nondecreasing function. The zero set is a closed bounded
//! interval, usually a single point.

use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{invalid, Error, Result};
use crate::roots::{zero_interval, Monotone, Search};

/// Level `α` and the two capping thresholds `a` (below) and `b` (above).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    alpha: f64,
    a: f64,
    b: f64,
}

impl HuberParams {
    pub fn new(alpha: f64, a: f64, b: f64) -> Result<Self> {
        check_level(alpha)?;
        for (name, v) in [("a", a), ("b", b)] {
            if !(v > 0.0) || v.is_nan() {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(Self { alpha, a, b })
    }

    /// `H^α_a`, the case `a = b`.
    pub fn symmetric(alpha: f64, a: f64) -> Result<Self> {
        Self::new(alpha, a, a)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        invalid(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

/// A closed interval `[lo, hi]` of functional values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalResult {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Representative point used for scoring.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }
}

/// Default argument tolerance: `1e-9 · max(1, support width)`.
pub fn default_tolerance(f: &Distribution) -> f64 {
    let (lo, hi) = f.support_range();
    let width = hi - lo;
    if width.is_finite() {
        1e-9 * width.max(1.0)
    } else {
        1e-9
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        invalid(format!("tolerance must be positive, got {tol}"))
    }
}

/// `G(u)` together with its right derivative.
fn g_with_slope(f: &Distribution, p: &HuberParams, u: f64) -> (f64, f64) {
    let (alpha, a, b) = (p.alpha, p.a, p.b);
    if f.is_exact() {
        let below = f.integral_unchecked(u - b, u);
        let above = f.complement_unchecked(u, u + a);
        let (fl, fu, fr) = (f.cdf_at(u - b), f.cdf_at(u), f.cdf_at(u + a));
        let g = (1.0 - alpha) * below - alpha * above;
        (g, (1.0 - alpha) * (fu - fl) + alpha * (fr - fu))
    } else {
        let mid = f.partials_at(u);
        let left = f.partials_at(u - b);
        let right = f.partials_at(u + a);
        let below = (mid.lower - left.lower).max(0.0);
        let above = (mid.upper - right.upper).max(0.0);
        let g = (1.0 - alpha) * below - alpha * above;
        (g, (1.0 - alpha) * (mid.cdf - left.cdf) + alpha * (right.cdf - mid.cdf))
    }
}

/// `G(u) = (1-α)∫_{u-b}^u F - α∫_u^{u+a} (1-F)`.
pub fn g_value(f: &Distribution, p: &HuberParams, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("u must be finite, got {u}")));
    }
    Ok(g_with_slope(f, p, u).0)
}

struct HuberTarget<'a> {
    f: &'a Distribution,
    p: &'a HuberParams,
    width: f64,
}

impl Monotone for HuberTarget<'_> {
    fn eval(&mut self, x: f64) -> (f64, f64) {
        g_with_slope(self.f, self.p, x)
    }

    // rounding noise of the window integrals
    fn band(&self, x: f64) -> f64 {
        1e-13 * (self.p.a.min(self.width) + self.p.b.min(self.width)) + 1e-14 * (1.0 + x.abs())
    }
}

// Bracket hints shared by the three functionals. `below` and `above` widen
// the finite support so that the target is strictly signed at the ends.
fn search_for(f: &Distribution, below: f64, above: f64, tol: f64) -> Search {
    let (lo, hi) = f.support_range();
    let bounds = (lo - below - 1.0, hi + above + 1.0);
    let mean = f.mean();
    let guess = if mean.is_finite() { mean } else { 0.5 * (lo + hi) };
    Search { guess, step: f.scale_hint(), bounds: Some(bounds), tol }
}

fn clamp_to_support(f: &Distribution, (lo, hi): (f64, f64)) -> IntervalResult {
    let (slo, shi) = f.support_range();
    let lo = lo.clamp(slo, shi);
    let hi = hi.clamp(slo, shi);
    IntervalResult { lo: lo.min(hi), hi: hi.max(lo) }
}

/// The Huber functional `H^α_{a,b}(F)`, endpoints to within `tol`.
pub fn huber_functional(f: &Distribution, p: &HuberParams, tol: f64) -> Result<IntervalResult> {
    check_tol(tol)?;
    let (lo, hi) = f.support_range();
    let width = hi - lo;
    let mut target = HuberTarget { f, p, width };
    let (mut lo, mut hi) = zero_interval(&mut target, search_for(f, p.a, p.b, tol))?;
    if f.is_exact() {
        lo = polish(&mut target, lo, -1.0, tol).unwrap_or(lo);
        hi = polish(&mut target, hi, 1.0, tol).unwrap_or(hi);
    }
    Ok(clamp_to_support(f, (lo, hi)))
}

// One Newton step onto an endpoint of the zero set from just outside it
// (`side` is -1 for the lower end). `G` is piecewise linear for empirical
// laws, so this usually lands on the endpoint exactly. The step is kept only
// if it provably tightens the endpoint.
fn polish(t: &mut HuberTarget<'_>, end: f64, side: f64, tol: f64) -> Option<f64> {
    let u = end + side * tol;
    let (g, s) = t.eval(u);
    if !(s > 0.0) || g * side <= t.band(u) {
        return None;
    }
    let c = u - g / s;
    let delta = tol / 16.0;
    let inside = t.eval(c).0.abs() <= t.band(c);
    let outside = side * t.eval(c + side * delta).0 > t.band(c + side * delta);
    ((c - end).abs() <= tol && inside && outside).then_some(c)
}

/// The interval of `α`-quantiles, `[inf{F ≥ α}, inf{F > α}]`.
pub fn quantile(f: &Distribution, alpha: f64) -> Result<IntervalResult> {
    check_level(alpha)?;
    if let Some((lo, hi)) = f.exact_quantile(alpha) {
        return Ok(IntervalResult { lo, hi });
    }
    let tol = default_tolerance(f);
    let mut target = |x: f64| {
        let v = f.cdf_at(x) - alpha;
        (v, f.density(x).unwrap_or(f64::NAN))
    };
    let raw = zero_interval(&mut target, search_for(f, 0.0, 0.0, tol))?;
    Ok(clamp_to_support(f, raw))
}

/// The `α`-expectile, the unique root of
/// `(1-α)∫_{-∞}^x F = α∫_x^∞ (1-F)`, to within `tol` in `x`.
pub fn expectile(f: &Distribution, alpha: f64, tol: f64) -> Result<f64> {
    check_level(alpha)?;
    check_tol(tol)?;
    let mut target = |x: f64| {
        let p = f.partials_at(x);
        let v = (1.0 - alpha) * p.lower - alpha * p.upper;
        (v, (1.0 - alpha) * p.cdf + alpha * (1.0 - p.cdf))
    };
    let raw = zero_interval(&mut target, search_for(f, 0.0, 0.0, tol))?;
    let x = clamp_to_support(f, raw).midpoint();
    if !x.is_finite() {
        return Err(Error::Numeric("expectile search diverged".into()));
    }
    Ok(x)
}
