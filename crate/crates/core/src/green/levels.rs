use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PParam;

/// Quantities attached to one level sphere `Σ_t = {û = t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelFunctionals {
    pub t: f64,
    pub r_t: f64,
    /// `F(t) = ∫_{Σ_t} |∇û|²`.
    pub f: f64,
    /// `A(r_t)^{(p-3)/(p-1)}`, the same quantity by the flux identity.
    pub f_closed_form: f64,
    pub area: f64,
    /// `∫_{Σ_t} |∇û|^{p-1}`.
    pub flux: f64,
    /// `F/t - 4π c_p² t`.
    pub monotone_quantity: f64,
}

/// Anything that can report level functionals, so the checkers can run on
/// computed profiles and on synthetic data alike.
pub trait LevelSource: Send + Sync {
    fn p(&self) -> PParam;
    /// Closed range of admissible levels.
    fn level_range(&self) -> (f64, f64);
    fn functionals(&self, t: f64) -> Result<LevelFunctionals>;

    fn f_value(&self, t: f64) -> Result<f64> {
        Ok(self.functionals(t)?.f)
    }
}

/// `n` levels log-spaced strictly inside `(lo, hi)`, leaving a fraction
/// `margin` of the log-width free at each end for difference stencils.
pub fn level_grid(range: (f64, f64), n: usize, margin: f64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) || n < 2 || !(0.0..0.5).contains(&margin) {
        return Err(Error::InvalidArgument(format!(
            "level grid needs 0 < lo < hi, n >= 2, margin in [0, 0.5); got ({lo}, {hi}), {n}, {margin}"
        )));
    }
    let width = (hi / lo).ln();
    let a = lo.ln() + margin * width;
    let b = hi.ln() - margin * width;
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| (a + step * i as f64).exp()).collect())
}

/// Flat-space level data with a multiplicatively perturbed `F`:
/// `F(t) = 4π c_p² t² (1 + amplitude · sin ln t)`.
///
/// Used to check that the monotonicity detectors actually fire.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticLevels {
    p: PParam,
    amplitude: f64,
    range: (f64, f64),
}

impl SyntheticLevels {
    pub fn new(p: PParam, amplitude: f64, range: (f64, f64)) -> Self {
        Self { p, amplitude, range }
    }
}

impl LevelSource for SyntheticLevels {
    fn p(&self) -> PParam {
        self.p
    }

    fn level_range(&self) -> (f64, f64) {
        self.range
    }

    fn functionals(&self, t: f64) -> Result<LevelFunctionals> {
        let (lo, hi) = self.range;
        if !(t >= lo && t <= hi) {
            return Err(Error::LevelOutOfRange { t, lo, hi });
        }
        let pv = self.p.value();
        let coef = self.p.flat_coefficient();
        let f = coef * t * t * (1.0 + self.amplitude * t.ln().sin());
        // Geometry of the flat model at this level: t = μ(r).
        let c = self.p.c_p();
        let k = (4.0 * PI).powf(-1.0 / (pv - 1.0)) / c;
        let r_t = (t / k).powf(-1.0 / c);
        let area = 4.0 * PI * r_t * r_t;
        Ok(LevelFunctionals {
            t,
            r_t,
            f,
            f_closed_form: f,
            area,
            flux: 1.0,
            monotone_quantity: f / t - coef * t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_interior_and_log_spaced() {
        let g = level_grid((1e-3, 1e3), 7, 0.1).unwrap();
        assert_eq!(g.len(), 7);
        assert!(g[0] > 1e-3 && g[6] < 1e3);
        let ratio = g[1] / g[0];
        for w in g.windows(2) {
            assert!((w[1] / w[0] / ratio - 1.0).abs() < 1e-12);
        }
        assert!(level_grid((1.0, 1.0), 4, 0.1).is_err());
        assert!(level_grid((1.0, 2.0), 1, 0.1).is_err());
    }

    #[test]
    fn synthetic_flat_when_unperturbed() {
        let p = PParam::new(1.5, false).unwrap();
        let s = SyntheticLevels::new(p, 0.0, (1e-6, 1.0));
        let lf = s.functionals(1.0 / (48.0 * PI * PI)).unwrap();
        assert!((lf.r_t - 1.0).abs() < 1e-12);
        assert!(lf.monotone_quantity.abs() < 1e-15);
    }
}
