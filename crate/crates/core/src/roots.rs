//! Root finding for nondecreasing functions.
//!
//! Every functional in this crate is the zero set of a monotone function
//! (a CDF shifted by a level, the expectile residual, or the Huber `G`
//! function). The zero set is a closed interval that is usually a single
//! point. [`zero_interval`] first runs a safeguarded Newton iteration to get
//! close to the set, checks whether the set is a point by probing `±tol`, and
//! otherwise falls back to two plain bisections for the endpoints.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// A nondecreasing target evaluated together with a (one-sided) slope.
///
/// A zero or non-finite slope is allowed; the solver then bisects.
pub(crate) trait Monotone {
    fn eval(&mut self, x: f64) -> (f64, f64);

    /// Values with `|f| <= band(x)` are treated as zero.
    fn band(&self, _x: f64) -> f64 {
        0.0
    }
}

impl<F: FnMut(f64) -> (f64, f64)> Monotone for F {
    fn eval(&mut self, x: f64) -> (f64, f64) {
        self(x)
    }
}

/// Search hints for [`zero_interval`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Search {
    pub guess: f64,
    pub step: f64,
    /// Known bracket with `f(lo) < 0 < f(hi)`, if any. Either end may be
    /// infinite.
    pub bounds: Option<(f64, f64)>,
    pub tol: f64,
}

struct Banded<'a, M: Monotone> {
    inner: &'a mut M,
}

impl<M: Monotone> Banded<'_, M> {
    // -1, 0 or +1 after applying the zero band.
    fn sign(&mut self, x: f64) -> (i8, f64, f64) {
        let (v, s) = self.inner.eval(x);
        let eps = self.inner.band(x);
        let sign = if v < -eps {
            -1
        } else if v > eps {
            1
        } else {
            0
        };
        (sign, v, s)
    }
}

/// Safeguarded Newton iteration. Returns an approximate root together with
/// the tightest bracket seen (either side may still be infinite when the
/// iteration converged monotonically from one side).
fn newton<M: Monotone>(f: &mut Banded<'_, M>, search: &Search) -> Result<(f64, f64, f64)> {
    let (mut lo, mut hi) = search.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut x = search.guess;
    let mut step = search.step.abs().max(search.tol);
    if !(x > lo && x < hi) {
        x = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + step,
            (false, true) => hi - step,
            (false, false) => 0.0,
        };
    }
    for _ in 0..MAX_ITER {
        if !x.is_finite() {
            break;
        }
        let (sign, v, slope) = f.sign(x);
        match sign {
            -1 => lo = x,
            1 => hi = x,
            _ => return Ok((x, lo, hi)),
        }
        let proposal = if slope > 0.0 && slope.is_finite() { x - v / slope } else { f64::NAN };
        let bracketed = lo.is_finite() && hi.is_finite();
        let next = if bracketed {
            if hi - lo <= search.tol {
                return Ok((0.5 * (lo + hi), lo, hi));
            }
            if proposal > lo && proposal < hi && (proposal - x).abs() <= 0.5 * (hi - lo) {
                proposal
            } else {
                0.5 * (lo + hi)
            }
        } else {
            let dir = if sign < 0 { 1.0 } else { -1.0 };
            let d = proposal - x;
            let next = if d.is_finite() && d * dir > 0.0 { x + dir * (d.abs().min(step)) } else { x + dir * step };
            step *= 2.0;
            next
        };
        if (next - x).abs() <= 0.25 * search.tol {
            return Ok((next, lo, hi));
        }
        x = next;
    }
    Err(Error::Numeric(format!("root search did not converge (bracket [{lo}, {hi}])")))
}

fn expand<M: Monotone>(f: &mut Banded<'_, M>, from: f64, dir: f64, want: i8, step0: f64) -> Result<f64> {
    let mut step = step0;
    let mut x = from;
    for _ in 0..MAX_ITER {
        x += dir * step;
        if !x.is_finite() {
            break;
        }
        if f.sign(x).0 == want {
            return Ok(x);
        }
        step *= 2.0;
    }
    Err(Error::Numeric("failed to bracket a sign change".into()))
}

// Boundary of a monotone predicate: `pred(lo)` holds, `pred(hi)` does not.
fn boundary<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > 0.5 * tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero set `[sup{f < -band}, inf{f > band}]` of a nondecreasing function,
/// each endpoint to within `search.tol`.
pub(crate) fn zero_interval<M: Monotone>(f: &mut M, search: Search) -> Result<(f64, f64)> {
    let tol = search.tol;
    let mut banded = Banded { inner: f };
    let (root, lo, hi) = newton(&mut banded, &search)?;

    let left = banded.sign(root - tol).0;
    let right = banded.sign(root + tol).0;
    if left < 0 && right > 0 {
        return Ok((root, root));
    }

    let step = search.step.abs().max(tol);
    let lo = if lo.is_finite() && lo < root - tol {
        lo
    } else if left < 0 {
        root - tol
    } else {
        expand(&mut banded, root, -1.0, -1, step)?
    };
    let hi = if hi.is_finite() && hi > root + tol {
        hi
    } else if right > 0 {
        root + tol
    } else {
        expand(&mut banded, root, 1.0, 1, step)?
    };

    let a = boundary(|u| banded.sign(u).0 < 0, lo, hi, tol);
    let b = boundary(|u| banded.sign(u).0 <= 0, lo, hi, tol);
    Ok((a.min(b), b.max(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search(guess: f64, tol: f64) -> Search {
        Search { guess, step: 1.0, bounds: None, tol }
    }

    #[test]
    fn finds_simple_root_from_either_side() {
        for guess in [-50.0, 0.0, 3.0, 1e4] {
            let mut f = |x: f64| (x * x * x - 8.0, 3.0 * x * x);
            let (lo, hi) = zero_interval(&mut f, search(guess, 1e-12)).unwrap();
            assert!((lo - 2.0).abs() < 1e-11 && (hi - 2.0).abs() < 1e-11, "{guess}: {lo} {hi}");
        }
    }

    #[test]
    fn recovers_flat_zero_set() {
        // zero on [1, 4], linear outside, slope withheld
        let mut f = |x: f64| {
            let v = if x < 1.0 {
                x - 1.0
            } else if x > 4.0 {
                x - 4.0
            } else {
                0.0
            };
            (v, 0.0)
        };
        let (lo, hi) = zero_interval(&mut f, search(10.0, 1e-10)).unwrap();
        assert!((lo - 1.0).abs() < 1e-10);
        assert!((hi - 4.0).abs() < 1e-10);
    }

    #[test]
    fn handles_jumps() {
        // step function: -1 below 2, +1 from 2 on
        let mut f = |x: f64| (if x < 2.0 { -1.0 } else { 1.0 }, 0.0);
        let (lo, hi) = zero_interval(&mut f, search(0.0, 1e-12)).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn respects_bounds() {
        let mut f = |x: f64| (x.tanh(), 1.0 - x.tanh().powi(2));
        let s = Search { guess: 100.0, step: 1.0, bounds: Some((-3.0, 5.0)), tol: 1e-13 };
        let (lo, hi) = zero_interval(&mut f, s).unwrap();
        assert!(lo.abs() < 1e-13 && hi.abs() < 1e-13);
    }
}
