//! Bracketed root finding for monotone scalar functions.

use crate::error::{Error, Result};

/// Bisection on a nondecreasing `f` with `f(lo) <= 0 <= f(hi)`.
///
/// Returns the midpoint of the final bracket once its width drops below
/// `tol`, or when the bracket can no longer be split in floating point.
pub fn bisect_increasing<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo <= hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grows `hi` by doubling from `start` until `f(hi) > 0`.
pub fn expand_upper<F>(mut f: F, start: f64, max_doublings: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start;
    for _ in 0..=max_doublings {
        if f(hi) > 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Bracket { hi: hi / 2.0 })
}
