//! Bracketed root finding.

use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root<F> {
    pub root: F,
    pub residual: F,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`. Needs `f(lo)` and `f(hi)` of opposite sign (or
/// one of them zero). Stops once the bracket is narrower than `2·tol` or
/// the midpoint no longer moves at this precision.
pub fn bisect<F, G>(f: G, lo: F, hi: F, tol: F, max_iter: usize) -> Result<Root<F>>
where
    F: Float,
    G: Fn(F) -> F,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    let same_sign = (f_lo > F::zero() && f_hi > F::zero()) || (f_lo < F::zero() && f_hi < F::zero());
    if f_lo.is_nan() || f_hi.is_nan() || same_sign {
        return Err(Error::NoSignChange {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    if f_lo == F::zero() {
        return Ok(Root { root: lo, residual: f_lo, iterations: 0 });
    }
    if f_hi == F::zero() {
        return Ok(Root { root: hi, residual: f_hi, iterations: 0 });
    }
    let two = F::one() + F::one();
    for iteration in 1..=max_iter {
        let mid = lo + (hi - lo) / two;
        let f_mid = f(mid);
        if f_mid == F::zero() || (hi - lo) / two < tol || mid <= lo || mid >= hi {
            return Ok(Root { root: mid, residual: f_mid, iterations: iteration });
        }
        if (f_mid > F::zero()) == (f_lo > F::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mid = lo + (hi - lo) / two;
    Ok(Root { root: mid, residual: f(mid), iterations: max_iter })
}
