//! Bracketing root finder.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` for a function with `f(lo)` and `f(hi)` of
/// opposite signs.
///
/// Stops once the bracket is no wider than `tol`, once no floating-point
/// number lies strictly inside it, or on an exact zero. With `tol = 0` the
/// bracket is refined down to adjacent floats.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<Root>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoBracket { lo, hi });
    }

    let mut iterations = 0;
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            let (x, fx) = {
                let f_mid = f(mid);
                if f_mid.abs() <= f_lo.abs() {
                    (mid, f_mid)
                } else {
                    (lo, f_lo)
                }
            };
            return Ok(Root {
                x,
                residual: fx.abs(),
                iterations,
            });
        }
        iterations += 1;
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(Root {
                x: mid,
                residual: 0.0,
                iterations,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r.x - std::f64::consts::SQRT_2).abs() <= 4.0 * f64::EPSILON);
        assert!(r.iterations > 40);
    }

    #[test]
    fn respects_tolerance() {
        let r = bisect(|x| x - 0.3, 0.0, 1.0, 1e-3).unwrap();
        assert!((r.x - 0.3).abs() < 1e-3);
        assert!(r.iterations <= 11);
    }

    #[test]
    fn endpoint_zero() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 0.0).unwrap().x, 0.0);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0),
            Err(Error::NoBracket { .. })
        ));
    }
}
