//! Consistent scoring functions for Huber functionals, quantiles and
//! expectiles, their elementary scores and mixture representations.
//!
//! Every consistent score for `H^α_{a,b}` has the form
//!
//! ```text
//! S(x, y) = |1{x ≥ y} - α| · (φ(y) - φ(κ + y) + κ φ'(x)),   κ = κ_{a,b}(x - y)
//! ```
//!
//! for a convex `φ` with left derivative `φ'`, and equals
//! `∫ S_θ(x, y) dM(θ)` with `dM = dφ'`. A [`ConvexSpec`] fixes `φ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::HuberParams;
use crate::quad;

/// `κ_{a,b}(x) = max(min(x, b), -a)`. Either cap may be infinite.
#[inline]
pub fn capped(a: f64, b: f64, x: f64) -> f64 {
    x.min(b).max(-a)
}

#[inline]
fn side_weight(alpha: f64, x: f64, y: f64) -> f64 {
    if x >= y {
        1.0 - alpha
    } else {
        alpha
    }
}

/// Generalized Huber loss `h^α_{a,b}(u)`.
pub fn generalized_huber_loss(p: &HuberParams, u: f64) -> f64 {
    let (alpha, a, b) = (p.alpha(), p.a(), p.b());
    if u > b {
        (1.0 - alpha) * b * (u - 0.5 * b)
    } else if u < -a {
        -alpha * a * (u + 0.5 * a)
    } else if u >= 0.0 {
        (1.0 - alpha) * 0.5 * u * u
    } else {
        alpha * 0.5 * u * u
    }
}

/// Derivative of [`generalized_huber_loss`], `|1{u ≥ 0} - α| κ_{a,b}(u)`.
pub fn generalized_huber_derivative(p: &HuberParams, u: f64) -> f64 {
    side_weight(p.alpha(), u, 0.0) * capped(p.a(), p.b(), u)
}

/// Classical Huber loss `2 h^{1/2}_{a,a}(u)`: `u²/2` inside `[-a, a]`,
/// `a(|u| - a/2)` outside.
pub fn classical_huber_loss(a: f64, u: f64) -> f64 {
    let v = u.abs();
    if v <= a {
        0.5 * v * v
    } else {
        a * (v - 0.5 * a)
    }
}

/// Identification function `|1{x ≥ y} - α| κ_{a,b}(x - y)`.
pub fn identification_value(p: &HuberParams, x: f64, y: f64) -> f64 {
    side_weight(p.alpha(), x, y) * capped(p.a(), p.b(), x - y)
}

/// Level `α = (1 - r_G) / (2 - r_L - r_G)` implied by a tax rate `r_G` on
/// profits and a deduction rate `r_L` on losses.
pub fn tax_rates_to_alpha(r_gain: f64, r_loss: f64) -> Result<f64> {
    for (name, r) in [("gain", r_gain), ("loss", r_loss)] {
        if !(0.0..1.0).contains(&r) {
            return invalid(format!("{name} rate must lie in [0, 1), got {r}"));
        }
    }
    Ok((1.0 - r_gain) / (2.0 - r_loss - r_gain))
}

/// Serialised form of a [`ConvexSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSpecRepr {
    /// `φ(t) = t²`
    Quadratic,
    /// `φ(t) = 2 e^{λt} / λ²`
    Exp { lambda: f64 },
    /// `φ''` is the step function taking `density[k]` on
    /// `[grid[k], grid[k+1])` and zero outside the grid.
    Density { grid: Vec<f64>, density: Vec<f64> },
    /// `dφ'` is a finite sum of point masses.
    Points { locations: Vec<f64>, masses: Vec<f64> },
    /// `φ''(θ) = 1 + (lo_knee - θ)₊ + (θ - hi_knee)₊`.
    Extremes { lo_knee: f64, hi_knee: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Phi {
    Quadratic,
    Exp { lambda: f64 },
    Density { grid: Vec<f64>, density: Vec<f64>, slope: Vec<f64>, level: Vec<f64> },
    Points { locations: Vec<f64>, masses: Vec<f64> },
    Extremes { lo: f64, hi: f64 },
}

/// A convex function `φ` selecting one consistent score, together with its
/// mixing measure `dM = dφ'` (`φ'` the left derivative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConvexSpecRepr", into = "ConvexSpecRepr")]
pub struct ConvexSpec {
    phi: Phi,
}

impl TryFrom<ConvexSpecRepr> for ConvexSpec {
    type Error = Error;

    fn try_from(repr: ConvexSpecRepr) -> Result<Self> {
        match repr {
            ConvexSpecRepr::Quadratic => Ok(Self::quadratic()),
            ConvexSpecRepr::Exp { lambda } => Self::exponential(lambda),
            ConvexSpecRepr::Density { grid, density } => Self::piecewise_density(&grid, &density),
            ConvexSpecRepr::Points { locations, masses } => Self::point_masses(&locations, &masses),
            ConvexSpecRepr::Extremes { lo_knee, hi_knee } => extremes_convex_spec(lo_knee, hi_knee),
        }
    }
}

impl From<ConvexSpec> for ConvexSpecRepr {
    fn from(spec: ConvexSpec) -> Self {
        match spec.phi {
            Phi::Quadratic => Self::Quadratic,
            Phi::Exp { lambda } => Self::Exp { lambda },
            Phi::Density { grid, density, .. } => Self::Density { grid, density },
            Phi::Points { locations, masses } => Self::Points { locations, masses },
            Phi::Extremes { lo, hi } => Self::Extremes { lo_knee: lo, hi_knee: hi },
        }
    }
}

impl ConvexSpec {
    pub fn quadratic() -> Self {
        Self { phi: Phi::Quadratic }
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda == 0.0 {
            return invalid(format!("exponential spec needs finite nonzero lambda, got {lambda}"));
        }
        Ok(Self { phi: Phi::Exp { lambda } })
    }

    pub fn piecewise_density(grid: &[f64], density: &[f64]) -> Result<Self> {
        if grid.len() < 2 || density.len() + 1 != grid.len() {
            return invalid("density spec needs a grid of n >= 2 points and n - 1 densities");
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("density grid must be finite and strictly increasing");
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("densities must be finite and nonnegative");
        }
        // φ'(grid[k]) and φ(grid[k]), both zero at the first grid point
        let n = grid.len();
        let mut slope = vec![0.0; n];
        let mut level = vec![0.0; n];
        for k in 0..n - 1 {
            let h = grid[k + 1] - grid[k];
            slope[k + 1] = slope[k] + density[k] * h;
            level[k + 1] = level[k] + slope[k] * h + 0.5 * density[k] * h * h;
        }
        Ok(Self { phi: Phi::Density { grid: grid.to_vec(), density: density.to_vec(), slope, level } })
    }

    pub fn point_masses(locations: &[f64], masses: &[f64]) -> Result<Self> {
        if locations.is_empty() || locations.len() != masses.len() {
            return invalid("point-mass spec needs equally many locations and masses");
        }
        if locations.iter().any(|l| !l.is_finite()) {
            return invalid("point-mass locations must be finite");
        }
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return invalid("point masses must be positive");
        }
        let mut pairs: Vec<(f64, f64)> = locations.iter().copied().zip(masses.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            phi: Phi::Points {
                locations: pairs.iter().map(|p| p.0).collect(),
                masses: pairs.iter().map(|p| p.1).collect(),
            },
        })
    }

    pub fn repr(&self) -> ConvexSpecRepr {
        self.clone().into()
    }

    /// `φ(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        match &self.phi {
            Phi::Quadratic => t * t,
            Phi::Exp { lambda } => 2.0 * (lambda * t).exp() / (lambda * lambda),
            Phi::Density { grid, density, slope, level } => {
                if t <= grid[0] {
                    return 0.0;
                }
                let n = grid.len();
                if t >= grid[n - 1] {
                    return level[n - 1] + slope[n - 1] * (t - grid[n - 1]);
                }
                let k = grid.partition_point(|&g| g <= t) - 1;
                let h = t - grid[k];
                level[k] + slope[k] * h + 0.5 * density[k] * h * h
            }
            Phi::Points { locations, masses } => {
                locations.iter().zip(masses).map(|(&l, &m)| m * (t - l).max(0.0)).sum()
            }
            Phi::Extremes { lo, hi } => {
                let below = (lo - t).max(0.0);
                let above = (t - hi).max(0.0);
                0.5 * t * t + (below * below * below + above * above * above) / 6.0
            }
        }
    }

    /// Left derivative `φ'(t)`, which is `M((-∞, t))` up to a constant.
    pub fn phi_left_deriv(&self, t: f64) -> f64 {
        match &self.phi {
            Phi::Quadratic => 2.0 * t,
            Phi::Exp { lambda } => 2.0 * (lambda * t).exp() / lambda,
            Phi::Density { grid, density, slope, .. } => {
                if t <= grid[0] {
                    return 0.0;
                }
                let n = grid.len();
                if t >= grid[n - 1] {
                    return slope[n - 1];
                }
                let k = grid.partition_point(|&g| g <= t) - 1;
                slope[k] + density[k] * (t - grid[k])
            }
            Phi::Points { locations, masses } => {
                let k = locations.partition_point(|&l| l < t);
                masses[..k].iter().sum()
            }
            Phi::Extremes { lo, hi } => {
                let below = (lo - t).max(0.0);
                let above = (t - hi).max(0.0);
                t - 0.5 * below * below + 0.5 * above * above
            }
        }
    }

    /// Density of the mixing measure, `None` for point masses.
    pub fn mixing_density(&self, theta: f64) -> Option<f64> {
        match &self.phi {
            Phi::Quadratic => Some(2.0),
            Phi::Exp { lambda } => Some(2.0 * (lambda * theta).exp()),
            Phi::Density { grid, density, .. } => {
                if theta < grid[0] || theta >= grid[grid.len() - 1] {
                    Some(0.0)
                } else {
                    Some(density[grid.partition_point(|&g| g <= theta) - 1])
                }
            }
            Phi::Points { .. } => None,
            Phi::Extremes { lo, hi } => Some(1.0 + (lo - theta).max(0.0) + (theta - hi).max(0.0)),
        }
    }

    /// `M([lo, hi)) = φ'(hi) - φ'(lo)`.
    pub fn mixing_mass(&self, lo: f64, hi: f64) -> f64 {
        self.phi_left_deriv(hi) - self.phi_left_deriv(lo)
    }

    // Points where the mixing density changes form.
    fn knots(&self) -> &[f64] {
        match &self.phi {
            Phi::Density { grid, .. } => grid,
            _ => &[],
        }
    }
}

/// `φ''(θ) = 1 + (lo_knee - θ)₊ + (θ - hi_knee)₊`, weighting thresholds
/// outside `[lo_knee, hi_knee]` increasingly. Handled in closed form.
pub fn extremes_convex_spec(lo_knee: f64, hi_knee: f64) -> Result<ConvexSpec> {
    if !(lo_knee.is_finite() && hi_knee.is_finite() && lo_knee <= hi_knee) {
        return invalid(format!("extremes spec needs finite knees lo <= hi, got ({lo_knee}, {hi_knee})"));
    }
    Ok(ConvexSpec { phi: Phi::Extremes { lo: lo_knee, hi: hi_knee } })
}

// e^z - 1 - z without cancellation near zero
fn expm1_minus_id(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = 0.5 * z * z;
        let mut sum = term;
        for k in 3..30 {
            term *= z / k as f64;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        z.exp_m1() - z
    }
}

// (1/λ²)(e^{λy} - e^{λ(y+κ)}) + (κ/λ) e^{λx}, arranged to survive λ → 0
fn exp_bracket(lambda: f64, kappa: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    let scale = (lambda * y).exp();
    scale * (kappa * (lambda * d).exp_m1() / lambda - expm1_minus_id(lambda * kappa) / (lambda * lambda))
}

/// Consistent score for `H^α_{a,b}` generated by `φ`.
pub fn consistent_huber_score(c: &ConvexSpec, p: &HuberParams, x: f64, y: f64) -> f64 {
    let d = x - y;
    let kappa = capped(p.a(), p.b(), d);
    let w = side_weight(p.alpha(), x, y);
    let bracket = match &c.phi {
        Phi::Quadratic => kappa * (2.0 * d - kappa),
        Phi::Exp { lambda } => 2.0 * exp_bracket(*lambda, kappa, x, y),
        _ => c.phi(y) - c.phi(kappa + y) + kappa * c.phi_left_deriv(x),
    };
    (w * bracket).max(0.0)
}

/// Exponential family `S_{λ;a}`, the score for `H^{1/2}_a` generated by
/// `φ(t) = 2e^{λt}/λ²`.
pub fn exponential_family_score(lambda: f64, a: f64, x: f64, y: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda == 0.0 {
        return invalid(format!("lambda must be finite and nonzero, got {lambda}"));
    }
    if !(a > 0.0) {
        return invalid(format!("a must be positive, got {a}"));
    }
    let kappa = capped(a, a, x - y);
    Ok(exp_bracket(lambda, kappa, x, y).max(0.0))
}

/// Consistent score for the `α`-quantile, `|1{x ≥ y} - α| |g(x) - g(y)|`
/// with `g = φ'`.
pub fn consistent_quantile_score(c: &ConvexSpec, alpha: f64, x: f64, y: f64) -> f64 {
    side_weight(alpha, x, y) * (c.phi_left_deriv(x) - c.phi_left_deriv(y)).abs()
}

/// Consistent (Bregman) score for the `α`-expectile.
pub fn consistent_expectile_score(c: &ConvexSpec, alpha: f64, x: f64, y: f64) -> f64 {
    let bracket = match &c.phi {
        Phi::Quadratic => (x - y) * (x - y),
        Phi::Exp { lambda } => {
            // (2/λ²) e^{λx} (e^{-λd} - 1 + λd) with d = x - y
            let d = x - y;
            let base = 2.0 * (lambda * x).exp() / (lambda * lambda);
            base * expm1_minus_id(-lambda * d)
        }
        _ => c.phi(y) - c.phi(x) + c.phi_left_deriv(x) * (x - y),
    };
    (side_weight(alpha, x, y) * bracket).max(0.0)
}

/// Elementary Huber score `S^H_{α,a,b,θ}(x, y)`, right-continuous in `θ`.
pub fn elementary_huber_score(p: &HuberParams, theta: f64, x: f64, y: f64) -> f64 {
    if y <= theta && theta < x {
        (1.0 - p.alpha()) * (theta - y).min(p.b())
    } else if x <= theta && theta < y {
        p.alpha() * (y - theta).min(p.a())
    } else {
        0.0
    }
}

/// Left limit in `θ` of [`elementary_huber_score`].
pub fn elementary_huber_score_left(p: &HuberParams, theta: f64, x: f64, y: f64) -> f64 {
    if y < theta && theta <= x {
        (1.0 - p.alpha()) * (theta - y).min(p.b())
    } else if x < theta && theta <= y {
        p.alpha() * (y - theta).min(p.a())
    } else {
        0.0
    }
}

/// Elementary quantile score, right-continuous in `θ`.
pub fn elementary_quantile_score(alpha: f64, theta: f64, x: f64, y: f64) -> f64 {
    if y <= theta && theta < x {
        1.0 - alpha
    } else if x <= theta && theta < y {
        alpha
    } else {
        0.0
    }
}

/// Left limit in `θ` of [`elementary_quantile_score`].
pub fn elementary_quantile_score_left(alpha: f64, theta: f64, x: f64, y: f64) -> f64 {
    if y < theta && theta <= x {
        1.0 - alpha
    } else if x < theta && theta <= y {
        alpha
    } else {
        0.0
    }
}

/// Elementary expectile score, right-continuous in `θ`.
pub fn elementary_expectile_score(alpha: f64, theta: f64, x: f64, y: f64) -> f64 {
    if y <= theta && theta < x {
        (1.0 - alpha) * (theta - y)
    } else if x <= theta && theta < y {
        alpha * (y - theta)
    } else {
        0.0
    }
}

/// Left limit in `θ` of [`elementary_expectile_score`].
pub fn elementary_expectile_score_left(alpha: f64, theta: f64, x: f64, y: f64) -> f64 {
    if y < theta && theta <= x {
        (1.0 - alpha) * (theta - y)
    } else if x < theta && theta <= y {
        alpha * (y - theta)
    } else {
        0.0
    }
}

// 3-point Gauss-Legendre on [-1, 1], exact for quintics
const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// `∫ S^H_{α,a,b,θ}(x, y) dM(θ)`, piecewise over the breakpoints of the
/// integrand. Exact (up to rounding) except for the exponential spec, which
/// uses adaptive quadrature.
pub fn mixture_quadrature_score(c: &ConvexSpec, p: &HuberParams, x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    if let Phi::Points { locations, masses } = &c.phi {
        return locations.iter().zip(masses).map(|(&t, &m)| m * elementary_huber_score(p, t, x, y)).sum();
    }
    let mut cuts = vec![lo, hi, y - p.a(), y + p.b()];
    cuts.extend(c.knots().iter().copied());
    if let Phi::Extremes { lo: k0, hi: k1 } = &c.phi {
        cuts.push(*k0);
        cuts.push(*k1);
    }
    cuts.retain(|&t| t >= lo && t <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |t: f64| elementary_huber_score(p, t, x, y) * c.mixing_density(t).unwrap_or(0.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (l, u) = (w[0], w[1]);
        if u <= l {
            continue;
        }
        let (mid, half) = (0.5 * (l + u), 0.5 * (u - l));
        total += match &c.phi {
            Phi::Exp { .. } => {
                let scale = integrand(mid).abs().max(integrand(l + 0.25 * (u - l)).abs()) * (u - l);
                quad::integrate(integrand, l, u, 1e-14 * scale.max(1e-300))
            }
            _ => {
                let mut s = 0.0;
                for (node, weight) in GL3_NODES.iter().zip(GL3_WEIGHTS) {
                    s += weight * integrand(mid + half * node);
                }
                s * half
            }
        };
    }
    total
}
