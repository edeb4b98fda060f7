//! Univariate probability distributions with exact CDF integrals.
//!
//! Everything downstream (quantiles, expectiles, Huber functionals) is
//! expressed through integrals of the CDF `F` and of its complement `1 - F`
//! over bounded windows. Each variant therefore exposes the three quantities
//!
//! * `F(x)`,
//! * the lower partial integral `∫_{-∞}^x F(t) dt = E(x - Y)₊`,
//! * the upper partial integral `∫_x^∞ (1 - F(t)) dt = E(Y - x)₊`,
//!
//! in closed form where one exists. Step and piecewise-linear CDFs are
//! integrated exactly over windows, never by quadrature.

use rand::Rng;
use rand_distr::{Exp, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::special::{norm_cdf, norm_pdf, norm_sf, owens_t};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Absolute tolerance of parametric quadratures.
pub const QUAD_TOL: f64 = 1e-10;

/// `F(x)` together with both partial integrals at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub cdf: f64,
    /// `∫_{-∞}^x F(t) dt`
    pub lower: f64,
    /// `∫_x^∞ (1 - F(t)) dt`
    pub upper: f64,
}

/// Weighted step CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    // prefix[k] = sum of weights[..k]; suffix[k] = sum of weights[k..]
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    // weighted value prefix sums, used for wide windows
    moment: Vec<f64>,
}

impl EmpiricalSample {
    /// Builds a sample from values and positive weights. Weights are
    /// normalised to sum to one and tied values are merged.
    pub fn new(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return invalid("empirical sample needs at least one value");
        }
        if values.len() != weights.len() {
            return invalid("values and weights differ in length");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("empirical values must be finite");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return invalid("empirical weights must be positive and finite");
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        let values: Vec<f64> = merged.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = merged.iter().map(|p| p.1 / total).collect();
        let n = values.len();
        // cumulate raw weights and divide once, so integer weights give
        // correctly rounded levels such as k/n
        let mut raw = vec![0.0; n + 1];
        let mut moment = vec![0.0; n + 1];
        for i in 0..n {
            raw[i + 1] = raw[i] + merged[i].1;
            moment[i + 1] = moment[i] + weights[i] * values[i];
        }
        let total = raw[n];
        let prefix: Vec<f64> = raw.iter().map(|c| c / total).collect();
        let suffix: Vec<f64> = raw.iter().map(|c| (total - c) / total).collect();
        Ok(Self { values, weights, prefix, suffix, moment })
    }

    pub fn equal_weights(values: &[f64]) -> Result<Self> {
        Self::new(values, &vec![1.0; values.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    // number of values <= t
    fn count_le(&self, t: f64) -> usize {
        self.values.partition_point(|&v| v <= t)
    }

    // number of values < t
    fn count_lt(&self, t: f64) -> usize {
        self.values.partition_point(|&v| v < t)
    }

    fn cdf(&self, t: f64) -> f64 {
        self.prefix[self.count_le(t)]
    }

    fn cdf_left(&self, t: f64) -> f64 {
        self.prefix[self.count_lt(t)]
    }

    // Σ_{i in range} w_i (u - v_i)
    fn weighted_gap_below(&self, range: std::ops::Range<usize>, u: f64) -> f64 {
        if range.len() <= 64 {
            range.map(|i| self.weights[i] * (u - self.values[i])).sum()
        } else {
            let w = self.prefix[range.end] - self.prefix[range.start];
            let m = self.moment[range.end] - self.moment[range.start];
            w * u - m
        }
    }

    // Σ_{i in range} w_i (v_i - l)
    fn weighted_gap_above(&self, range: std::ops::Range<usize>, l: f64) -> f64 {
        if range.len() <= 64 {
            range.map(|i| self.weights[i] * (self.values[i] - l)).sum()
        } else {
            let w = self.prefix[range.end] - self.prefix[range.start];
            let m = self.moment[range.end] - self.moment[range.start];
            m - w * l
        }
    }

    /// `∫_l^u F = Σ w_i (u - max(l, v_i))₊`
    fn integral(&self, l: f64, u: f64) -> f64 {
        let kl = self.count_le(l);
        let ku = self.count_le(u);
        self.prefix[kl] * (u - l) + self.weighted_gap_below(kl..ku, u)
    }

    /// `∫_l^u (1 - F) = Σ w_i (min(u, v_i) - l)₊`
    fn complement_integral(&self, l: f64, u: f64) -> f64 {
        let kl = self.count_le(l);
        let ku = self.count_lt(u);
        self.suffix[ku] * (u - l) + self.weighted_gap_above(kl..ku.max(kl), l)
    }

    fn partials(&self, x: f64) -> Partials {
        let k = self.count_le(x);
        let lower = self.weighted_gap_below(0..k, x);
        let upper = self.weighted_gap_above(k..self.values.len(), x);
        Partials { cdf: self.prefix[k], lower, upper }
    }

    fn mean(&self) -> f64 {
        self.moment[self.values.len()]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.prefix[1..].partition_point(|&c| c <= u);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Exact quantile interval of the step CDF.
    fn quantile(&self, alpha: f64) -> (f64, f64) {
        // lo = inf{x: F(x) >= α}, hi = inf{x: F(x) > α}
        let n = self.values.len();
        let lo_idx = (0..n).find(|&i| self.prefix[i + 1] >= alpha).unwrap_or(n - 1);
        let hi_idx = (0..n).find(|&i| self.prefix[i + 1] > alpha).unwrap_or(n - 1);
        (self.values[lo_idx], self.values[hi_idx])
    }
}

/// CDF given by linear interpolation between knots `(t_k, F_k)`.
///
/// `F` is zero left of the first knot (so `F_0 > 0` places an atom there)
/// and the last knot must reach one.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearCdf {
    t: Vec<f64>,
    f: Vec<f64>,
}

impl PiecewiseLinearCdf {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return invalid("piecewise-linear CDF needs at least one knot");
        }
        let t: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let mut f: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if t.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return invalid("knots must be finite");
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("knot positions must be strictly increasing");
        }
        if f.windows(2).any(|w| w[1] < w[0]) || f[0] < 0.0 {
            return invalid("knot CDF values must be nondecreasing and nonnegative");
        }
        let last = *f.last().unwrap();
        if (last - 1.0).abs() > 1e-9 {
            return invalid("the last knot must have CDF value 1");
        }
        *f.last_mut().unwrap() = 1.0;
        Ok(Self { t, f })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.f.iter().copied())
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x < self.t[0] {
            return 0.0;
        }
        if x >= self.t[n - 1] {
            return 1.0;
        }
        let k = self.t.partition_point(|&v| v <= x) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let (f0, f1) = (self.f[k], self.f[k + 1]);
        f0 + (f1 - f0) * (x - t0) / (t1 - t0)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x <= self.t[0] {
            0.0
        } else {
            self.cdf(x)
        }
    }

    // ∫_l^u h(F(t)) dt for h affine in F: h(F) = c0 + c1 F
    fn affine_integral(&self, l: f64, u: f64, c0: f64, c1: f64) -> f64 {
        let n = self.t.len();
        let mut acc = 0.0;
        // left of the first knot F = 0
        let a = l;
        let b = u.min(self.t[0]);
        if b > a {
            acc += c0 * (b - a);
        }
        for k in 0..n.saturating_sub(1) {
            let a = l.max(self.t[k]);
            let b = u.min(self.t[k + 1]);
            if b > a {
                acc += 0.5 * (b - a) * (2.0 * c0 + c1 * (self.cdf(a) + self.cdf_inside(b, k)));
            }
        }
        let a = l.max(self.t[n - 1]);
        if u > a {
            acc += (c0 + c1) * (u - a);
        }
        acc
    }

    // F at b evaluated on piece k (b may equal the right knot)
    fn cdf_inside(&self, b: f64, k: usize) -> f64 {
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let (f0, f1) = (self.f[k], self.f[k + 1]);
        f0 + (f1 - f0) * (b - t0) / (t1 - t0)
    }

    fn integral(&self, l: f64, u: f64) -> f64 {
        self.affine_integral(l, u, 0.0, 1.0)
    }

    fn complement_integral(&self, l: f64, u: f64) -> f64 {
        self.affine_integral(l, u, 1.0, -1.0)
    }

    fn partials(&self, x: f64) -> Partials {
        let first = self.t[0];
        let last = *self.t.last().unwrap();
        let lower = if x > first { self.integral(first, x) } else { 0.0 };
        let upper = if x < last { self.complement_integral(x, last) } else { 0.0 };
        Partials { cdf: self.cdf(x), lower, upper }
    }

    fn density(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x < self.t[0] || x >= self.t[n - 1] {
            return 0.0;
        }
        let k = self.t.partition_point(|&v| v <= x) - 1;
        (self.f[k + 1] - self.f[k]) / (self.t[k + 1] - self.t[k])
    }

    fn mean(&self) -> f64 {
        let mut m = self.t[0] * self.f[0];
        for k in 0..self.t.len() - 1 {
            m += (self.f[k + 1] - self.f[k]) * 0.5 * (self.t[k] + self.t[k + 1]);
        }
        m
    }

    fn inverse(&self, u: f64) -> f64 {
        if u < self.f[0] {
            return self.t[0];
        }
        let n = self.t.len();
        for k in 0..n - 1 {
            let (f0, f1) = (self.f[k], self.f[k + 1]);
            if u < f1 && f1 > f0 {
                return self.t[k] + (u - f0) / (f1 - f0) * (self.t[k + 1] - self.t[k]);
            }
        }
        self.t[n - 1]
    }

    fn quantile(&self, alpha: f64) -> (f64, f64) {
        let n = self.t.len();
        let lo = if alpha <= self.f[0] {
            self.t[0]
        } else {
            // first piece where F reaches alpha
            let mut x = self.t[n - 1];
            for k in 0..n - 1 {
                let (f0, f1) = (self.f[k], self.f[k + 1]);
                if f1 >= alpha && f1 > f0 {
                    x = self.t[k] + (alpha - f0) / (f1 - f0) * (self.t[k + 1] - self.t[k]);
                    break;
                }
            }
            x
        };
        // hi = inf{x: F(x) > alpha}
        let hi = if alpha < self.f[0] {
            self.t[0]
        } else {
            let mut x = self.t[n - 1];
            for k in 0..n - 1 {
                let (f0, f1) = (self.f[k], self.f[k + 1]);
                if f1 > alpha {
                    x = if f0 > alpha {
                        self.t[k]
                    } else {
                        self.t[k] + (alpha - f0) / (f1 - f0) * (self.t[k + 1] - self.t[k])
                    };
                    break;
                }
            }
            x
        };
        (lo, hi.max(lo))
    }
}

/// Normal law with mean `mean` and standard deviation `sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mean: f64,
    sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !(sd.is_finite() && sd > 0.0) {
            return invalid(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
        }
        Ok(Self { mean, sd })
    }

    fn partials(&self, x: f64) -> Partials {
        let z = (x - self.mean) / self.sd;
        let (pdf, cdf, sf) = (norm_pdf(z), norm_cdf(z), norm_sf(z));
        Partials { cdf, lower: self.sd * (z * cdf + pdf), upper: self.sd * (pdf - z * sf) }
    }
}

/// Skew normal law `SN(ξ, ω, ν)` with location `xi`, scale `omega` and
/// shape `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    xi: f64,
    omega: f64,
    nu: f64,
}

impl SkewNormal {
    pub fn new(xi: f64, omega: f64, nu: f64) -> Result<Self> {
        if !xi.is_finite() || !nu.is_finite() || !(omega.is_finite() && omega > 0.0) {
            return invalid(format!("skew normal needs finite ξ, ν and ω > 0, got ({xi}, {omega}, {nu})"));
        }
        Ok(Self { xi, omega, nu })
    }

    pub fn location(&self) -> f64 {
        self.xi
    }

    pub fn scale(&self) -> f64 {
        self.omega
    }

    pub fn shape(&self) -> f64 {
        self.nu
    }

    pub fn delta(&self) -> f64 {
        self.nu / (1.0 + self.nu * self.nu).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.xi + self.omega * self.delta() * SQRT_2_OVER_PI
    }

    fn standard_cdf(&self, z: f64) -> f64 {
        (norm_cdf(z) - 2.0 * owens_t(z, self.nu)).clamp(0.0, 1.0)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.standard_cdf((x - self.xi) / self.omega)
    }

    fn density(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        2.0 / self.omega * norm_pdf(z) * norm_cdf(self.nu * z)
    }

    fn partials(&self, x: f64) -> Partials {
        // Standardised Z with density 2φ(z)Φ(νz):
        //   E[Z; Z <= z] = -2φ(z)Φ(νz) + √(2/π) δ Φ(z√(1+ν²))
        //   E[Z; Z >  z] =  2φ(z)Φ(νz) + √(2/π) δ Φ̄(z√(1+ν²))
        let z = (x - self.xi) / self.omega;
        let t = owens_t(z, self.nu);
        let cdf = (norm_cdf(z) - 2.0 * t).clamp(0.0, 1.0);
        let sf = (norm_sf(z) + 2.0 * t).clamp(0.0, 1.0);
        let head = 2.0 * norm_pdf(z) * norm_cdf(self.nu * z);
        let r = (1.0 + self.nu * self.nu).sqrt();
        let dm = SQRT_2_OVER_PI * self.delta();
        let lower_moment = -head + dm * norm_cdf(z * r);
        let upper_moment = head + dm * norm_sf(z * r);
        Partials {
            cdf,
            lower: (self.omega * (z * cdf - lower_moment)).max(0.0),
            upper: (self.omega * (upper_moment - z * sf)).max(0.0),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let delta = self.delta();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z = delta * z1.abs() + (1.0 - delta * delta).sqrt() * z2;
        self.xi + self.omega * z
    }
}

/// Exponential law with the given rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return invalid(format!("exponential rate must be positive, got {rate}"));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn partials(&self, x: f64) -> Partials {
        let inv = 1.0 / self.rate;
        if x <= 0.0 {
            return Partials { cdf: 0.0, lower: 0.0, upper: inv - x };
        }
        let tail = (-self.rate * x).exp();
        Partials {
            cdf: -(-self.rate * x).exp_m1(),
            // x - (1 - e^{-λx})/λ
            lower: x + (-self.rate * x).exp_m1() * inv,
            upper: tail * inv,
        }
    }
}

/// Beta law on `[0, 1]` with shape parameters `r` and `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    r: f64,
    s: f64,
}

impl Beta {
    pub fn new(r: f64, s: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0 && s.is_finite() && s > 0.0) {
            return invalid(format!("beta shapes must be positive, got ({r}, {s})"));
        }
        Ok(Self { r, s })
    }

    fn mean(&self) -> f64 {
        self.r / (self.r + self.s)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.r, self.s, x)
        }
    }

    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.r - 1.0) * x.ln() + (self.s - 1.0) * (-x).ln_1p() - ln_beta(self.r, self.s)).exp()
    }

    fn partials(&self, x: f64) -> Partials {
        let m = self.mean();
        if x <= 0.0 {
            return Partials { cdf: 0.0, lower: 0.0, upper: m - x };
        }
        if x >= 1.0 {
            return Partials { cdf: 1.0, lower: x - m, upper: 0.0 };
        }
        let cdf = beta_reg(self.r, self.s, x);
        // E[Y; Y <= x] = mean * I_x(r + 1, s)
        let head = m * beta_reg(self.r + 1.0, self.s, x);
        let lower = (x * cdf - head).max(0.0);
        // E[Y; Y > x] - x P(Y > x)
        let tail_moment = m * (1.0 - beta_reg(self.r + 1.0, self.s, x));
        let upper = (tail_moment - x * (1.0 - cdf)).max(0.0);
        Partials { cdf, lower, upper }
    }
}

/// Law of `Y + U (floor + scale·V)` where `Y` follows `base`,
/// `U ~ Bernoulli(spike_prob)` and `V ~ Exp(spike_rate)`, all independent.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedSum {
    base: Box<Distribution>,
    spike_prob: f64,
    spike_scale: f64,
    spike_rate: f64,
    spike_floor: f64,
}

impl ContaminatedSum {
    pub fn new(base: Distribution, spike_prob: f64, spike_scale: f64, spike_rate: f64) -> Result<Self> {
        Self::with_floor(base, spike_prob, spike_scale, spike_rate, 0.0)
    }

    pub fn with_floor(
        base: Distribution,
        spike_prob: f64,
        spike_scale: f64,
        spike_rate: f64,
        spike_floor: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&spike_prob) {
            return invalid(format!("spike probability must lie in [0, 1], got {spike_prob}"));
        }
        if !(spike_scale.is_finite() && spike_scale > 0.0) {
            return invalid("spike scale must be positive");
        }
        if !(spike_rate.is_finite() && spike_rate > 0.0) {
            return invalid("spike rate must be positive");
        }
        if !(spike_floor.is_finite() && spike_floor >= 0.0) {
            return invalid("spike floor must be nonnegative");
        }
        Ok(Self { base: Box::new(base), spike_prob, spike_scale, spike_rate, spike_floor })
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn spike_prob(&self) -> f64 {
        self.spike_prob
    }

    /// Mean size of a spike, `floor + scale / rate`.
    pub fn mean_spike(&self) -> f64 {
        self.spike_floor + self.spike_scale / self.spike_rate
    }

    // E_V[g(x - floor - scale V)] by quadrature after V = -ln(1 - w)/rate
    fn spike_expectation<G: FnMut(f64) -> f64>(&self, x: f64, mut g: G) -> f64 {
        let shift = x - self.spike_floor;
        let k = self.spike_scale / self.spike_rate;
        quad::integrate(|w| g(shift + k * (-w).ln_1p()), 0.0, 1.0, QUAD_TOL)
    }

    // closed form when the base is a step CDF
    fn spike_partials_empirical(&self, sample: &EmpiricalSample, x: f64) -> Partials {
        let k = self.spike_scale / self.spike_rate;
        let shift = x - self.spike_floor;
        let mut p = Partials { cdf: 0.0, lower: 0.0, upper: 0.0 };
        for (&v, &w) in sample.values.iter().zip(&sample.weights) {
            let c = shift - v;
            if c > 0.0 {
                let tail = (-c / k).exp();
                p.cdf += w * (1.0 - tail);
                // E(c - sV)₊ = c - k(1 - e^{-c/k})
                p.lower += w * (c + k * (-c / k).exp_m1());
                p.upper += w * k * tail;
            } else {
                p.upper += w * (k - c);
            }
        }
        p
    }

    fn partials(&self, x: f64) -> Partials {
        let base = self.base.partials_at(x);
        if self.spike_prob == 0.0 {
            return base;
        }
        let spiked = match self.base.as_ref() {
            Distribution::Empirical(s) => self.spike_partials_empirical(s, x),
            other => Partials {
                cdf: self.spike_expectation(x, |t| other.cdf_at(t)),
                lower: self.spike_expectation(x, |t| other.partials_at(t).lower),
                upper: self.spike_expectation(x, |t| other.partials_at(t).upper),
            },
        };
        let p = self.spike_prob;
        Partials {
            cdf: (1.0 - p) * base.cdf + p * spiked.cdf,
            lower: (1.0 - p) * base.lower + p * spiked.lower,
            upper: (1.0 - p) * base.upper + p * spiked.upper,
        }
    }

    fn spiked_cdf(&self, x: f64) -> f64 {
        match self.base.as_ref() {
            Distribution::Empirical(s) => self.spike_partials_empirical(s, x).cdf,
            other => self.spike_expectation(x, |t| other.cdf_at(t)),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let base = self.base.cdf_at(x);
        if self.spike_prob == 0.0 {
            return base;
        }
        (1.0 - self.spike_prob) * base + self.spike_prob * self.spiked_cdf(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        // the spiked component is continuous
        let base = self.base.cdf_left_at(x);
        if self.spike_prob == 0.0 {
            return base;
        }
        (1.0 - self.spike_prob) * base + self.spike_prob * self.spiked_cdf(x)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y = self.base.sample_one(rng);
        let hit = rng.random::<f64>() < self.spike_prob;
        if hit {
            let v: f64 = Exp::new(self.spike_rate).map(|e| rng.sample(e)).unwrap_or(0.0);
            y + self.spike_floor + self.spike_scale * v
        } else {
            y
        }
    }
}

/// A probability distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Empirical(EmpiricalSample),
    PiecewiseLinear(PiecewiseLinearCdf),
    Normal(Normal),
    SkewNormal(SkewNormal),
    Exponential(Exponential),
    Beta(Beta),
    Contaminated(ContaminatedSum),
}

fn check_finite(t: f64, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {t}")))
    }
}

impl Distribution {
    pub fn empirical(values: &[f64]) -> Result<Self> {
        EmpiricalSample::equal_weights(values).map(Self::Empirical)
    }

    pub fn weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        EmpiricalSample::new(values, weights).map(Self::Empirical)
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        Self::empirical(&[c])
    }

    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        PiecewiseLinearCdf::new(knots).map(Self::PiecewiseLinear)
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Normal::new(mean, sd).map(Self::Normal)
    }

    pub fn skew_normal(xi: f64, omega: f64, nu: f64) -> Result<Self> {
        SkewNormal::new(xi, omega, nu).map(Self::SkewNormal)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Exponential::new(rate).map(Self::Exponential)
    }

    pub fn beta(r: f64, s: f64) -> Result<Self> {
        Beta::new(r, s).map(Self::Beta)
    }

    pub fn contaminated(base: Distribution, spike_prob: f64, spike_scale: f64, spike_rate: f64) -> Result<Self> {
        ContaminatedSum::new(base, spike_prob, spike_scale, spike_rate).map(Self::Contaminated)
    }

    /// `F(t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_finite(t, "t")?;
        Ok(self.cdf_at(t))
    }

    /// Left limit `F(t⁻)`.
    pub fn cdf_left(&self, t: f64) -> Result<f64> {
        check_finite(t, "t")?;
        Ok(self.cdf_left_at(t))
    }

    /// `∫_l^u F(t) dt`.
    pub fn cdf_integral(&self, l: f64, u: f64) -> Result<f64> {
        check_finite(l, "l")?;
        check_finite(u, "u")?;
        if l > u {
            return Err(Error::Argument(format!("integral bounds reversed: {l} > {u}")));
        }
        Ok(self.integral_unchecked(l, u))
    }

    /// `∫_l^u (1 - F(t)) dt`, computed directly rather than as
    /// `(u - l) - cdf_integral(l, u)`.
    pub fn complement_integral(&self, l: f64, u: f64) -> Result<f64> {
        check_finite(l, "l")?;
        check_finite(u, "u")?;
        if l > u {
            return Err(Error::Argument(format!("integral bounds reversed: {l} > {u}")));
        }
        Ok(self.complement_unchecked(l, u))
    }

    /// Smallest closed interval containing the support; endpoints may be
    /// infinite.
    pub fn support_range(&self) -> (f64, f64) {
        match self {
            Self::Empirical(s) => (s.values[0], *s.values.last().unwrap()),
            Self::PiecewiseLinear(p) => {
                let lo = if p.f[0] > 0.0 {
                    p.t[0]
                } else {
                    // skip a leading flat stretch at zero
                    let k = p.f.iter().rposition(|&v| v == 0.0).unwrap_or(0);
                    p.t[k]
                };
                let k = p.f.iter().position(|&v| v >= 1.0).unwrap_or(p.t.len() - 1);
                (lo, p.t[k])
            }
            Self::Normal(_) | Self::SkewNormal(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Exponential(_) => (0.0, f64::INFINITY),
            Self::Beta(_) => (0.0, 1.0),
            Self::Contaminated(c) => {
                let (lo, hi) = c.base.support_range();
                if c.spike_prob > 0.0 {
                    (lo, f64::INFINITY)
                } else {
                    (lo, hi)
                }
            }
        }
    }

    /// `n` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Empirical(s) => s.sample(rng),
            Self::PiecewiseLinear(p) => p.inverse(rng.random()),
            Self::Normal(n) => {
                let z: f64 = rng.sample(StandardNormal);
                n.mean + n.sd * z
            }
            Self::SkewNormal(s) => s.sample(rng),
            Self::Exponential(e) => {
                let v: f64 = rng.sample(Exp1);
                v / e.rate
            }
            Self::Beta(b) => rand_distr::Beta::new(b.r, b.s).map(|d| rng.sample(d)).unwrap_or(f64::NAN),
            Self::Contaminated(c) => c.sample(rng),
        }
    }

    /// Mean, when the first moment is finite (always, for these variants).
    pub fn mean(&self) -> f64 {
        match self {
            Self::Empirical(s) => s.mean(),
            Self::PiecewiseLinear(p) => p.mean(),
            Self::Normal(n) => n.mean,
            Self::SkewNormal(s) => s.mean(),
            Self::Exponential(e) => 1.0 / e.rate,
            Self::Beta(b) => b.mean(),
            Self::Contaminated(c) => c.base.mean() + c.spike_prob * c.mean_spike(),
        }
    }

    /// Lebesgue density where one is available in closed form.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Empirical(_) | Self::Contaminated(_) => None,
            Self::PiecewiseLinear(p) => Some(p.density(x)),
            Self::Normal(n) => Some(norm_pdf((x - n.mean) / n.sd) / n.sd),
            Self::SkewNormal(s) => Some(s.density(x)),
            Self::Exponential(e) => Some(if x < 0.0 { 0.0 } else { e.rate * (-e.rate * x).exp() }),
            Self::Beta(b) => Some(b.density(x)),
        }
    }

    /// A rough spread used to size bracketing steps.
    pub fn scale_hint(&self) -> f64 {
        match self {
            Self::Normal(n) => n.sd,
            Self::SkewNormal(s) => s.omega,
            Self::Exponential(e) => 1.0 / e.rate,
            Self::Contaminated(c) => c.base.scale_hint().max(c.mean_spike()),
            _ => {
                let (lo, hi) = self.support_range();
                (hi - lo).max(1e-3)
            }
        }
    }

    /// `true` for step and piecewise-linear CDFs, whose window integrals
    /// are exact.
    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Empirical(_) | Self::PiecewiseLinear(_))
    }

    pub(crate) fn cdf_at(&self, t: f64) -> f64 {
        match self {
            Self::Empirical(s) => s.cdf(t),
            Self::PiecewiseLinear(p) => p.cdf(t),
            Self::SkewNormal(s) => s.cdf(t),
            Self::Beta(b) => b.cdf(t),
            Self::Contaminated(c) => c.cdf(t),
            _ => self.partials_at(t).cdf,
        }
    }

    pub(crate) fn cdf_left_at(&self, t: f64) -> f64 {
        match self {
            Self::Empirical(s) => s.cdf_left(t),
            Self::PiecewiseLinear(p) => p.cdf_left(t),
            Self::Contaminated(c) => c.cdf_left(t),
            _ => self.cdf_at(t),
        }
    }

    /// `F(x)`, `∫_{-∞}^x F` and `∫_x^∞ (1 - F)` at once.
    pub fn partials_at(&self, x: f64) -> Partials {
        match self {
            Self::Empirical(s) => s.partials(x),
            Self::PiecewiseLinear(p) => p.partials(x),
            Self::Normal(n) => n.partials(x),
            Self::SkewNormal(s) => s.partials(x),
            Self::Exponential(e) => e.partials(x),
            Self::Beta(b) => b.partials(x),
            Self::Contaminated(c) => c.partials(x),
        }
    }

    pub(crate) fn integral_unchecked(&self, l: f64, u: f64) -> f64 {
        if l == u {
            return 0.0;
        }
        match self {
            Self::Empirical(s) => s.integral(l, u),
            Self::PiecewiseLinear(p) => p.integral(l, u),
            _ => (self.partials_at(u).lower - self.partials_at(l).lower).max(0.0),
        }
    }

    pub(crate) fn complement_unchecked(&self, l: f64, u: f64) -> f64 {
        if l == u {
            return 0.0;
        }
        match self {
            Self::Empirical(s) => s.complement_integral(l, u),
            Self::PiecewiseLinear(p) => p.complement_integral(l, u),
            _ => (self.partials_at(l).upper - self.partials_at(u).upper).max(0.0),
        }
    }

    /// Exact quantile interval for step and piecewise-linear CDFs.
    pub(crate) fn exact_quantile(&self, alpha: f64) -> Option<(f64, f64)> {
        match self {
            Self::Empirical(s) => Some(s.quantile(alpha)),
            Self::PiecewiseLinear(p) => Some(p.quantile(alpha)),
            Self::Exponential(e) => {
                let q = -(-alpha).ln_1p() / e.rate;
                Some((q, q))
            }
            _ => None,
        }
    }
}

/// Serialisable description of a distribution, used by file and CLI inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Empirical {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    SkewNormal {
        xi: f64,
        omega: f64,
        nu: f64,
    },
    Exponential {
        rate: f64,
    },
    Beta {
        r: f64,
        s: f64,
    },
    Contaminated {
        base: Box<DistributionSpec>,
        spike_prob: f64,
        spike_scale: f64,
        spike_rate: f64,
        #[serde(default)]
        spike_floor: f64,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<Distribution> {
        match self {
            Self::Empirical { values, weights: None } => Distribution::empirical(values),
            Self::Empirical { values, weights: Some(w) } => Distribution::weighted(values, w),
            Self::PiecewiseLinear { knots } => Distribution::piecewise_linear(knots),
            Self::Normal { mean, sd } => Distribution::normal(*mean, *sd),
            Self::SkewNormal { xi, omega, nu } => Distribution::skew_normal(*xi, *omega, *nu),
            Self::Exponential { rate } => Distribution::exponential(*rate),
            Self::Beta { r, s } => Distribution::beta(*r, *s),
            Self::Contaminated { base, spike_prob, spike_scale, spike_rate, spike_floor } => {
                ContaminatedSum::with_floor(base.build()?, *spike_prob, *spike_scale, *spike_rate, *spike_floor)
                    .map(Distribution::Contaminated)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> Distribution {
        Distribution::empirical(&[0.0, 10.0]).unwrap()
    }

    // Composite Simpson oracle for ∫_l^u F, independent of the partials code.
    fn simpson_cdf_integral(d: &Distribution, l: f64, u: f64, n: usize) -> f64 {
        let h = (u - l) / n as f64;
        let mut acc = d.cdf_at(l) + d.cdf_at(u);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * d.cdf_at(l + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn zoo() -> Vec<Distribution> {
        vec![
            two_point(),
            Distribution::weighted(&[-1.0, 0.5, 0.5, 3.0], &[0.2, 0.3, 0.1, 0.4]).unwrap(),
            Distribution::piecewise_linear(&[(0.0, 0.1), (1.0, 0.4), (2.0, 0.4), (4.0, 1.0)]).unwrap(),
            Distribution::normal(1.0, 2.0).unwrap(),
            Distribution::skew_normal(19.0, 6.0, 20.0).unwrap(),
            Distribution::skew_normal(0.0, 1.5, -4.0).unwrap(),
            Distribution::exponential(1.0).unwrap(),
            Distribution::beta(2.0, 5.0).unwrap(),
            Distribution::contaminated(Distribution::point_mass(0.0).unwrap(), 0.05, 5.0, 0.8).unwrap(),
            Distribution::contaminated(Distribution::normal(0.0, 1.0).unwrap(), 0.2, 1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn cdf_examples() {
        let e = Distribution::exponential(1.0).unwrap();
        assert!((e.cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(two_point().cdf(5.0).unwrap(), 0.5);
        let sn = Distribution::skew_normal(0.0, 1.0, 0.0).unwrap();
        assert!((sn.cdf(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(e.cdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(e.cdf(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_left_limits() {
        let d = two_point();
        assert_eq!(d.cdf_left(0.0).unwrap(), 0.0);
        assert_eq!(d.cdf(0.0).unwrap(), 0.5);
        assert_eq!(d.cdf_left(10.0).unwrap(), 0.5);
        let p = Distribution::piecewise_linear(&[(0.0, 0.25), (1.0, 1.0)]).unwrap();
        assert_eq!(p.cdf_left(0.0).unwrap(), 0.0);
        assert_eq!(p.cdf(0.0).unwrap(), 0.25);
        let n = Distribution::normal(0.0, 1.0).unwrap();
        assert_eq!(n.cdf_left(0.3).unwrap(), n.cdf(0.3).unwrap());
    }

    #[test]
    fn cdf_integral_examples() {
        assert!((two_point().cdf_integral(-0.5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let e = Distribution::exponential(1.0).unwrap();
        assert!((e.cdf_integral(0.0, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-12);
        for d in zoo() {
            assert_eq!(d.cdf_integral(0.7, 0.7).unwrap(), 0.0);
        }
        assert!(matches!(e.cdf_integral(1.0, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn support_examples() {
        assert_eq!(two_point().support_range(), (0.0, 10.0));
        assert_eq!(Distribution::exponential(1.0).unwrap().support_range(), (0.0, f64::INFINITY));
        assert_eq!(Distribution::beta(2.0, 5.0).unwrap().support_range(), (0.0, 1.0));
        let p = Distribution::piecewise_linear(&[(-1.0, 0.0), (0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(p.support_range(), (0.0, 1.0));
    }

    #[test]
    fn integrals_match_simpson_oracle() {
        for d in zoo() {
            for &(l, u) in &[(-2.0, 0.5), (0.1, 0.9), (15.0, 22.0), (-0.3, 4.2)] {
                // Simpson struggles across jumps, so only compare continuous laws tightly
                let got = d.cdf_integral(l, u).unwrap();
                let tol = if d.is_exact() || matches!(d, Distribution::Contaminated(_)) { 2e-3 } else { 1e-9 };
                let oracle = simpson_cdf_integral(&d, l, u, 20_000);
                assert!((got - oracle).abs() < tol, "{d:?} [{l},{u}]: {got} vs {oracle}");
                let comp = d.complement_integral(l, u).unwrap();
                assert!((got + comp - (u - l)).abs() < 1e-9, "{d:?}");
            }
        }
    }

    #[test]
    fn integral_additivity_and_nonnegativity() {
        for d in zoo() {
            let (l, m, u) = (-1.3, 0.4, 2.9);
            let whole = d.cdf_integral(l, u).unwrap();
            let parts = d.cdf_integral(l, m).unwrap() + d.cdf_integral(m, u).unwrap();
            assert!(whole >= 0.0);
            assert!((whole - parts).abs() < 1e-10, "{d:?}");
        }
    }

    #[test]
    fn derivative_of_integral_is_cdf() {
        for d in zoo() {
            for &u in &[-0.7, 0.3, 1.7, 2.5, 20.0] {
                // skip atoms and knots
                if d.cdf_left_at(u) != d.cdf_at(u) {
                    continue;
                }
                let h = 1e-5;
                let fd = (d.cdf_integral(-5.0, u + h).unwrap() - d.cdf_integral(-5.0, u - h).unwrap()) / (2.0 * h);
                assert!((fd - d.cdf_at(u)).abs() < 1e-6, "{d:?} at {u}: {fd}");
            }
        }
    }

    #[test]
    fn partial_moments_recover_the_mean() {
        // E(x - Y)₊ - E(Y - x)₊ = x - mean
        for d in zoo() {
            for &x in &[-3.0, 0.0, 0.5, 7.0, 25.0] {
                let p = d.partials_at(x);
                assert!((p.lower - p.upper - (x - d.mean())).abs() < 1e-8, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn skew_normal_cdf_against_density_quadrature() {
        let d = Distribution::skew_normal(19.0, 6.0, 20.0).unwrap();
        for &x in &[15.0, 19.0, 22.0, 30.0] {
            let oracle = quad::integrate(|t| d.density(t).unwrap(), -40.0, x, 1e-13);
            assert!((d.cdf(x).unwrap() - oracle).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn monotone_cdfs() {
        for d in zoo() {
            let mut prev = 0.0;
            for i in 0..=400 {
                let t = -10.0 + 0.1 * i as f64;
                let f = d.cdf_at(t);
                assert!(f >= prev - 1e-15 && (0.0..=1.0).contains(&f), "{d:?} at {t}");
                prev = f;
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = Distribution::skew_normal(1.0, 2.0, 3.0).unwrap();
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(9), 50);
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(9), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn normal_sample_mean() {
        let n = 100_000;
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let xs = d.sample(&mut ChaCha8Rng::seed_from_u64(1), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn skew_normal_sample_mean() {
        let n = 1_000_000;
        let d = Distribution::skew_normal(19.0, 6.0, 20.0).unwrap();
        let xs = d.sample(&mut ChaCha8Rng::seed_from_u64(2), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let delta = 20.0 / 401f64.sqrt();
        let expect = 19.0 + 6.0 * delta * (2.0 / std::f64::consts::PI).sqrt();
        assert!((expect - 23.78).abs() < 0.01);
        assert!((mean - expect).abs() < 0.02, "{mean} vs {expect}");
    }

    #[test]
    fn contaminated_point_mass_mean() {
        let n = 1_000_000;
        let d = Distribution::contaminated(Distribution::point_mass(0.0).unwrap(), 0.05, 5.0, 0.8).unwrap();
        assert!((d.mean() - 0.3125).abs() < 1e-15);
        let xs = d.sample(&mut ChaCha8Rng::seed_from_u64(3), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.3125).abs() < 0.01, "{mean}");
    }

    #[test]
    fn spike_floor_shifts_the_spike() {
        let base = Distribution::point_mass(0.0).unwrap();
        let c = ContaminatedSum::with_floor(base, 1.0, 5.0, 0.8, 5.0).unwrap();
        let d = Distribution::Contaminated(c);
        assert_eq!(d.cdf(4.999).unwrap(), 0.0);
        assert!((d.mean() - 11.25).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_distance_of_draws() {
        let n = 1_000_000;
        for d in [
            Distribution::skew_normal(0.0, 1.0, 5.0).unwrap(),
            Distribution::beta(2.0, 5.0).unwrap(),
            Distribution::piecewise_linear(&[(0.0, 0.1), (1.0, 0.4), (2.0, 0.4), (4.0, 1.0)]).unwrap(),
        ] {
            let mut xs = d.sample(&mut ChaCha8Rng::seed_from_u64(11), n);
            xs.sort_by(f64::total_cmp);
            let (lo, hi) = (xs[0], xs[n - 1]);
            let mut ks: f64 = 0.0;
            for i in 0..=2000 {
                let t = lo + (hi - lo) * i as f64 / 2000.0;
                let right = xs.partition_point(|&x| x <= t) as f64 / n as f64;
                let left = xs.partition_point(|&x| x < t) as f64 / n as f64;
                ks = ks.max((right - d.cdf_at(t)).abs()).max((left - d.cdf_left_at(t)).abs());
            }
            assert!(ks < 0.005, "{d:?}: {ks}");
        }
    }

    #[test]
    fn empirical_ties_merge() {
        let d = EmpiricalSample::new(&[1.0, 1.0, 2.0], &[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.values(), &[1.0, 2.0]);
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Distribution::normal(0.0, 0.0).is_err());
        assert!(Distribution::exponential(-1.0).is_err());
        assert!(Distribution::empirical(&[]).is_err());
        assert!(Distribution::piecewise_linear(&[(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(Distribution::piecewise_linear(&[(0.0, 0.0), (1.0, 0.9)]).is_err());
        assert!(Distribution::weighted(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn spec_roundtrip() {
        let spec: DistributionSpec =
            serde_json::from_str(r#"{"kind":"skew_normal","xi":19,"omega":6,"nu":20}"#).unwrap();
        assert_eq!(spec.build().unwrap(), Distribution::skew_normal(19.0, 6.0, 20.0).unwrap());
        let spec: DistributionSpec = serde_json::from_str(
            r#"{"kind":"contaminated","base":{"kind":"empirical","values":[0]},"spike_prob":0.05,"spike_scale":5,"spike_rate":0.8}"#,
        )
        .unwrap();
        assert!((spec.build().unwrap().mean() - 0.3125).abs() < 1e-15);
    }
}
