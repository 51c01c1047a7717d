//! Bracketed root finding for monotone scalar equations.

use crate::error::{Error, Result};

/// Safeguarded Newton iteration on a bracket `[lo, hi]` where `f(lo)` and
/// `f(hi)` have opposite signs. Falls back to bisection whenever the Newton
/// step leaves the bracket or fails to shrink it fast enough.
///
/// `fdf` returns `(f(x), f'(x))`. Converges when the bracket width or the
/// last step is below `x_tol`, or when `f(x) == 0`.
pub fn safeguarded_newton<F>(fdf: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (flo, _) = fdf(lo);
    let (fhi, _) = fdf(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo:e}, {fhi:e})"
        )));
    }
    let increasing = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    let mut step_two_back = hi - lo;
    let mut step_one_back = hi - lo;
    for _ in 0..max_iter {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        // Bisect when Newton leaves the bracket or its steps stop halving.
        let next = if newton > lo && newton < hi && (newton - x).abs() <= 0.5 * step_two_back {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        step_two_back = step_one_back;
        step_one_back = step;
        x = next;
        if step <= x_tol || hi - lo <= x_tol {
            return Ok(x);
        }
    }
    Err(Error::RootFinding(format!(
        "no convergence after {max_iter} iterations (bracket [{lo}, {hi}])"
    )))
}

/// Plain bisection for a monotone predicate-free function; used where no
/// derivative is available.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootFinding(format!("no sign change on [{lo}, {hi}]")));
    }
    let increasing = fhi > 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_cube_root() {
        let x = safeguarded_newton(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_survives_bad_derivative() {
        // atan has tiny derivative far from the root; plain Newton overshoots.
        let x = safeguarded_newton(|x: f64| (x.atan(), 1.0 / (1.0 + x * x)), -50.0, 60.0, 1e-14, 200).unwrap();
        assert!(x.abs() < 1e-13);
    }

    #[test]
    fn missing_sign_change_is_reported() {
        assert!(safeguarded_newton(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12, 50).is_err());
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50).is_err());
    }

    #[test]
    fn bisection_converges() {
        let x = bisect(|x: f64| x.cos() - x, 0.0, 1.0, 1e-15, 200).unwrap();
        assert!((x.cos() - x).abs() < 1e-14);
    }
}
