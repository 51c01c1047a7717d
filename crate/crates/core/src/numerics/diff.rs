//! Richardson-extrapolated central differences (Ridders' tableau).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

const SHRINK: f64 = 1.4;
const SHRINK2: f64 = SHRINK * SHRINK;
const TABLE: usize = 10;

/// Derivative of `f` at `x` from central differences with initial step `h0`,
/// extrapolated to zero step. Steps only shrink, so every evaluation lies in
/// `[x - h0, x + h0]`.
pub fn central_richardson<F>(f: F, x: f64, h0: f64) -> Result<Derivative>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h0 > 0.0) {
        return Err(Error::Differentiation {
            t: x,
            detail: format!("non-positive step {h0}"),
        });
    }
    let mut a = [[0.0f64; TABLE]; TABLE];
    let mut h = h0;
    a[0][0] = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let mut best = Derivative {
        value: a[0][0],
        error: f64::INFINITY,
    };
    for i in 1..TABLE {
        h /= SHRINK;
        a[0][i] = (f(x + h)? - f(x - h)?) / (2.0 * h);
        let mut fac = SHRINK2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK2;
            let err = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if err <= best.error {
                best = Derivative {
                    value: a[j][i],
                    error: err,
                };
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * best.error {
            break;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Differentiation {
            t: x,
            detail: "non-finite derivative".into(),
        });
    }
    Ok(best)
}

/// Five-point second derivative on a uniform stencil of half-width `2h`.
pub fn second_derivative_5pt<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

/// Five-point first derivative on a uniform stencil of half-width `2h`.
pub fn first_derivative_5pt<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_derivative_to_high_accuracy() {
        let d = central_richardson(|x: f64| Ok(x.exp()), 1.0, 0.1).unwrap();
        assert!((d.value - 1f64.exp()).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn noisy_free_polynomial() {
        let d = central_richardson(|x: f64| Ok(x.powi(5) - 3.0 * x), 2.0, 1e-2).unwrap();
        assert!((d.value - (5.0 * 16.0 - 3.0)).abs() < 1e-9);
    }

    #[test]
    fn five_point_stencils() {
        let h = 1e-3;
        assert!((first_derivative_5pt(f64::sin, 0.7, h) - 0.7f64.cos()).abs() < 1e-12);
        assert!((second_derivative_5pt(f64::sin, 0.7, h) + 0.7f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn errors_propagate() {
        let r = central_richardson(|x: f64| if x > 1.05 { Err(Error::InvalidArgument("edge".into())) } else { Ok(x) }, 1.0, 0.1);
        assert!(r.is_err());
    }
}
