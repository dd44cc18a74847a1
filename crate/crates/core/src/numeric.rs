//! Small scalar numerics shared by the solvers: bracketed root finding,
//! golden-section maximization and central differences.

use crate::{Error, Result};

/// Relative step used for every central finite difference in the crate.
pub const FD_REL_STEP: f64 = 1e-6;

/// Central difference of `f` at `x` with step `rel_step * |x|`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, rel_step: f64) -> f64 {
    let h = rel_step * x.abs().max(f64::MIN_POSITIVE);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Root of a continuous `f` on `[lo, hi]` whose endpoint values have
/// opposite signs (or one of them is zero).
///
/// Regula falsi with the Illinois modification, falling back to a plain
/// bisection step whenever three iterations fail to halve the bracket, so
/// convergence is at worst a constant factor slower than bisection. Stops
/// once the bracket is narrower than `xtol` or than float resolution.
pub fn bracketed_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Domain(format!("root not bracketed on [{lo}, {hi}]: f = {f_lo}, {f_hi}")));
    }
    // -1 = last kept endpoint was lo, +1 = hi
    let mut side = 0i8;
    // bracket widths of the last three iterations
    let mut widths = [hi - lo; 3];
    for k in 0..max_iter {
        // adjacent floats may be farther apart than `xtol`
        if hi - lo <= xtol.max(f64::EPSILON * hi.abs().max(lo.abs())) {
            return Ok(0.5 * (lo + hi));
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) || (hi - lo) > 0.5 * widths[k % 3] {
            x = 0.5 * (lo + hi);
        }
        widths[k % 3] = hi - lo;
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    if hi - lo <= xtol.max(f64::EPSILON * hi.abs().max(lo.abs())) {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::NoConvergence(format!("bracket [{lo}, {hi}] still wider than {xtol} after {max_iter} iterations")))
    }
}

/// Plain bisection for a function that is known to change sign on
/// `[lo, hi]`; used where the caller wants the textbook method.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> f64 {
    let positive_at_lo = f(lo) > 0.0;
    for _ in 0..max_iter {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // the bracket stops shrinking once it reaches float resolution
    for _ in 0..256 {
        if hi - lo <= xtol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximize `f` on `[lo, hi]` by scanning a grid of `points` nodes
/// (geometric spacing when `log_spaced`), then refining the best cell with
/// golden-section search. Robust to flat tails where golden search alone
/// would wander.
pub fn grid_golden_max(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    log_spaced: bool,
    xtol: f64,
) -> (f64, f64) {
    let points = points.max(3);
    let node = |k: usize| {
        let t = k as f64 / (points - 1) as f64;
        if log_spaced {
            lo * (hi / lo).powf(t)
        } else {
            lo + t * (hi - lo)
        }
    };
    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for k in 0..points {
        let v = f(node(k));
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let a = node(best_k.saturating_sub(1));
    let b = node((best_k + 1).min(points - 1));
    let (x, v) = golden_max(&f, a, b, xtol);
    if v >= best {
        (x, v)
    } else {
        (node(best_k), best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracketed_root_finds_sqrt2() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bracketed_root_rejects_unbracketed() {
        assert!(bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn bracketed_root_handles_steep_functions() {
        // nearly a step; pure regula falsi stalls here
        let r = bracketed_root(|x| (50.0 * (x - 0.3)).tanh(), 0.0, 1.0, 1e-14, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, v) = golden_max(|x| -(x - 1.25).powi(2) + 3.0, -4.0, 9.0, 1e-10);
        // a flat peak pins x only to about sqrt(eps)
        assert!((x - 1.25).abs() < 1e-7);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn grid_golden_survives_flat_tail() {
        let f = |x: f64| if x < 10.0 { x * (10.0 - x) } else { 0.0 };
        let (x, _) = grid_golden_max(f, 1.0, 1000.0, 40, true, 1e-9);
        assert!((x - 5.0).abs() < 1e-6);
    }

    #[test]
    fn central_difference_of_cube() {
        let d = central_difference(|x| x * x * x, 2.0, FD_REL_STEP);
        assert!((d - 12.0).abs() < 1e-8);
    }
}
