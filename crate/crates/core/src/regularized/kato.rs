use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hessian_radial, RadialHessian, RadialJet, WarpedMetric};
use crate::green::GreenProfile;
use crate::numerics::diff::{central_richardson, Derivative};

use super::{eta_defect_ratio, eta_eps, first_integral_slope_derivative, RegularizedProfile};

/// Initial step, in `ln t`, of the level-derivative tableau.
const LOG_STEP: f64 = 1e-3;

/// A decreasing radial solution `u` with `|u'| = s(r)` obeying the first
/// integral `A φ_ε(s) s = const`.
pub trait RadialField {
    fn metric(&self) -> &WarpedMetric;
    fn exponent(&self) -> f64;
    fn eps(&self) -> f64;
    fn slope(&self, r: f64) -> Result<f64>;
    fn level_radius(&self, t: f64) -> Result<f64>;
    /// `(min u, max u)` over the field's domain.
    fn value_range(&self) -> (f64, f64);

    fn slope_derivative(&self, r: f64) -> Result<f64> {
        let s = self.slope(r)?;
        Ok(first_integral_slope_derivative(self.metric(), self.exponent(), self.eps(), r, s))
    }

    fn hessian(&self, r: f64) -> Result<RadialHessian> {
        let jet = RadialJet {
            d1: -self.slope(r)?,
            d2: -self.slope_derivative(r)?,
        };
        hessian_radial(self.metric(), jet, r)
    }

    /// `F(t) = ∫_{u=t} |∇u|²`.
    fn level_energy(&self, t: f64) -> Result<f64> {
        let r = self.level_radius(t)?;
        let s = self.slope(r)?;
        Ok(self.metric().area(r) * s * s)
    }
}

impl RadialField for GreenProfile {
    fn metric(&self) -> &WarpedMetric {
        GreenProfile::metric(self)
    }

    fn exponent(&self) -> f64 {
        self.p().value()
    }

    fn eps(&self) -> f64 {
        0.0
    }

    fn slope(&self, r: f64) -> Result<f64> {
        Ok(self.gradient_at(r))
    }

    fn level_radius(&self, t: f64) -> Result<f64> {
        self.invert_level(t)
    }

    fn value_range(&self) -> (f64, f64) {
        self.level_range()
    }
}

impl RadialField for RegularizedProfile {
    fn metric(&self) -> &WarpedMetric {
        &self.problem.metric
    }

    fn exponent(&self) -> f64 {
        self.problem.p.value()
    }

    fn eps(&self) -> f64 {
        self.problem.eps
    }

    fn slope(&self, r: f64) -> Result<f64> {
        RegularizedProfile::slope(self, r)
    }

    fn level_radius(&self, t: f64) -> Result<f64> {
        self.invert_level(t)
    }

    fn value_range(&self) -> (f64, f64) {
        self.level_range()
    }
}

/// One sample of the improved Kato inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoSample {
    pub r: f64,
    pub eta: f64,
    /// `|∇²u|²`.
    pub lhs: f64,
    /// `min((η²+2η+3)/2, 2) |∇|∇u||²`.
    pub bound_full: f64,
    /// `((η²+2η+3)/2) ⟨∇|∇u|, ν⟩²`.
    pub bound_nu: f64,
    pub margin_full: f64,
    pub margin_nu: f64,
}

impl KatoSample {
    /// Relative tolerance for roundoff in the margins.
    pub const TOLERANCE: f64 = 1e-12;

    pub fn violated(&self) -> bool {
        let floor = -Self::TOLERANCE * self.lhs;
        self.margin_full < floor || self.margin_nu < floor
    }

    /// `lhs / bound_nu`; 1 means the inequality is an equality.
    pub fn saturation(&self) -> f64 {
        self.lhs / self.bound_nu
    }
}

pub fn kato_check<F: RadialField + ?Sized>(field: &F, radii: &[f64]) -> Result<Vec<KatoSample>> {
    let p = field.exponent();
    let eps = field.eps();
    radii
        .iter()
        .map(|&r| {
            let s = field.slope(r)?;
            let eta = eta_eps(s, eps, p)?;
            let h = field.hessian(r)?;
            let lhs = h.norm_sq();
            // Radially ∇|∇u| is parallel to ν, so both gradient terms are h_rad².
            let grad_sq = h.rad * h.rad;
            let k = 0.5 * (eta * eta + 2.0 * eta + 3.0);
            let bound_full = k.min(2.0) * grad_sq;
            let bound_nu = k * grad_sq;
            Ok(KatoSample {
                r,
                eta,
                lhs,
                bound_full,
                bound_nu,
                margin_full: lhs - bound_full,
                margin_nu: lhs - bound_nu,
            })
        })
        .collect()
}

/// `F'(t)` by Richardson-extrapolated central differences in `ln t`.
pub fn level_derivative<F: RadialField + ?Sized>(field: &F, t: f64) -> Result<Derivative> {
    let (lo, hi) = field.value_range();
    let x = t.ln();
    if !(x - LOG_STEP >= lo.ln() && x + LOG_STEP <= hi.ln()) {
        return Err(Error::Differentiation {
            t,
            detail: format!("stencil of half-width {LOG_STEP} in ln t leaves the level range ({lo}, {hi})"),
        });
    }
    let d = central_richardson(|y| field.level_energy(y.exp()), x, LOG_STEP)?;
    Ok(Derivative {
        value: d.value / t,
        error: d.error / t,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("β must exceed 1, got {beta}")));
    }
    Ok(())
}

/// The three terms of `𝓗_ε(t)`, which sum to [`h_eps`].
pub fn h_eps_terms<F: RadialField + ?Sized>(field: &F, t: f64, beta: f64, lambda: f64) -> Result<[f64; 3]> {
    check_beta(beta)?;
    let p = field.exponent();
    let f = field.level_energy(t)?;
    let df = level_derivative(field, t)?.value;
    let shift = beta - lambda * (5.0 - p) / (2.0 * (3.0 - p));
    let coef = 4.0 * PI * (3.0 - p) / ((p - 1.0) * (beta - 1.0));
    Ok([
        t.powf(-beta) * df,
        shift * t.powf(-beta - 1.0) * f,
        -coef * t.powf(1.0 - beta),
    ])
}

/// `𝓗_ε(t) = t^{-β} F' + (β - λ(5-p)/(2(3-p))) t^{-β-1} F - 4π(3-p)/((p-1)(β-1)) t^{1-β}`.
pub fn h_eps<F: RadialField + ?Sized>(field: &F, t: f64, beta: f64, lambda: f64) -> Result<f64> {
    Ok(h_eps_terms(field, t, beta, lambda)?.iter().sum())
}

/// `t^{-β} ∫_{Σ_t} ((p-2-η)/(3-p)) ((η-1)/η) Δu`, with `(p-2-η)/η` replaced
/// by the identical `ε/s²` so that `p = 2` needs no special case.
fn error_density<F: RadialField + ?Sized>(field: &F, t: f64, beta: f64) -> Result<f64> {
    let eps = field.eps();
    if eps == 0.0 {
        return Ok(0.0);
    }
    let p = field.exponent();
    let r = field.level_radius(t)?;
    let s = field.slope(r)?;
    if s == 0.0 {
        return Err(Error::InvalidArgument(format!("critical level t = {t}: η vanishes with ε > 0")));
    }
    let eta = eta_eps(s, eps, p)?;
    let laplacian = field.hessian(r)?.laplacian();
    let integrand = eta_defect_ratio(s, eps) * (eta - 1.0) / (3.0 - p) * laplacian;
    Ok(t.powf(-beta) * field.metric().area(r) * integrand)
}

/// The boundary term `𝐄_{ε,t₁,t₂}`, the density at `t₁` minus that at `t₂`.
pub fn error_term_e<F: RadialField + ?Sized>(field: &F, t1: f64, t2: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(t1 < t2) {
        return Err(Error::InvalidArgument(format!("levels must satisfy t1 < t2, got ({t1}, {t2})")));
    }
    Ok(error_density(field, t1, beta)? - error_density(field, t2, beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PParam, WarpedMetric};
    use crate::green::{solve_green, GridSpec};
    use crate::numerics::log_space;
    use crate::regularized::{solve_regularized_shooting, AnnulusProblem};
    use approx::assert_relative_eq;

    fn flat(p: f64) -> GreenProfile {
        solve_green(&WarpedMetric::euclidean(), PParam::new(p, false).unwrap(), GridSpec::default()).unwrap()
    }

    #[test]
    fn flat_green_saturates_nu_bound() {
        for p in [2.0, 1.5] {
            let g = flat(p);
            let samples = kato_check(&g, &log_space(1e-3, 1e3, 200)).unwrap();
            for s in &samples {
                assert!(!s.violated());
                assert_relative_eq!(s.saturation(), 1.0, max_relative = 1e-12);
                assert_relative_eq!(s.eta, p - 2.0);
            }
            let h = g.hessian(1.0).unwrap();
            assert_relative_eq!(h.tan / h.rad, -(p - 1.0) / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn analytic_second_derivative_matches_differences() {
        let m = WarpedMetric::power_cap(0.8, 2.0).unwrap();
        let g = solve_green(&m, PParam::new(1.5, false).unwrap(), GridSpec::default()).unwrap();
        let prob = AnnulusProblem::from_green(&g, 1e-3, 0.5, 5.0).unwrap();
        let prof = solve_regularized_shooting(&prob, 65).unwrap();
        for r in [0.7, 1.5, 3.0, 4.5] {
            let h = 1e-4 * r;
            let fd = (prof.slope(r + h).unwrap() - prof.slope(r - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(prof.slope_derivative(r).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn flat_rigidity_makes_h_vanish() {
        let g = flat(1.5);
        let beta = 2.0 / (3.0 - 1.5);
        for t in [1e-3, 2.11e-3, 0.1] {
            let h = h_eps(&g, t, beta, 2.0).unwrap();
            let scale = 4.0 * PI * 9.0 * t.powf(1.0 - beta);
            assert!(h.abs() < 1e-8 * scale, "t = {t}: {h}");
        }
    }

    #[test]
    fn error_term_vanishes_without_regularization() {
        let g = flat(1.5);
        assert_eq!(error_term_e(&g, 1e-3, 1e-2, 1.5).unwrap(), 0.0);
        assert!(error_term_e(&g, 1e-2, 1e-3, 1.5).is_err());
        assert!(h_eps(&g, 1e-3, 1.0, 2.0).is_err());
    }
}
