//! Normal-law helpers and Owen's T function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::quad;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate for large `x`.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Owen's T function
///
/// `T(h, a) = (1/2π) ∫_0^a exp(-h²(1+x²)/2) / (1+x²) dx`
///
/// evaluated by adaptive Gauss-Kronrod quadrature (absolute tolerance
/// `1e-10`). For `|a| > 1` the argument is reflected through
/// `T(h,a) + T(ah,1/a) = ½[Φ(h)Φ̄(ah) + Φ(ah)Φ̄(h)]` (valid for `h ≥ 0`,
/// `a > 0`) so the quadrature range never exceeds `[0, 1]`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a == 0.0 || h.is_nan() || a.is_nan() {
        return 0.0;
    }
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    let h = h.abs();
    if a.is_infinite() {
        return 0.5 * norm_sf(h);
    }
    if a <= 1.0 {
        return owens_t_quadrature(h, a);
    }
    let ah = a * h;
    let (ph, pah) = (norm_cdf(h), norm_cdf(ah));
    let joint = 0.5 * (ph * norm_sf(ah) + pah * norm_sf(h));
    joint - owens_t_quadrature(ah, 1.0 / a)
}

fn owens_t_quadrature(h: f64, a: f64) -> f64 {
    let hh = 0.5 * h * h;
    if hh > 700.0 {
        return 0.0;
    }
    let prefactor = (-hh).exp() / (2.0 * PI);
    if prefactor == 0.0 {
        return 0.0;
    }
    let integral = quad::integrate(
        |x| {
            let q = 1.0 + x * x;
            (-hh * x * x).exp() / q
        },
        0.0,
        a,
        1e-11 / prefactor,
    );
    prefactor * integral
}
