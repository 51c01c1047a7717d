//! Radial flux integrals `∫ A(s)^{-1/(p-1)} ds` and the nonparabolicity test.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate, Tolerance};

use super::{PParam, WarpedMetric};

const TAIL_TOL: Tolerance = Tolerance::new(0.0, 1e-14);

/// `A(s)^{-1/(p-1)}`, the modulus of the unit-flux radial gradient.
pub fn flux_integrand(metric: &WarpedMetric, p: &PParam, s: f64) -> f64 {
    metric.area(s).powf(-1.0 / (p.value() - 1.0))
}

fn ln_flux_integrand(metric: &WarpedMetric, p: f64, ln_s: f64) -> f64 {
    -((4.0 * PI).ln() + 2.0 * metric.ln_w(ln_s)) / (p - 1.0)
}

/// Log-slope of `w` over the decade ending at `radius`.
fn fitted_exponent(metric: &WarpedMetric, radius: f64) -> f64 {
    (metric.w(radius).ln() - metric.w(radius / 10.0).ln()) / LN_10
}

/// `∫_a^b A^{-1/(p-1)} ds`, integrated in `ln s` over decade-sized chunks
/// split at the metric's junctions.
pub(crate) fn flux_integral(metric: &WarpedMetric, p: f64, a: f64, b: f64) -> Result<f64> {
    debug_assert!(0.0 < a && a <= b);
    if a == b {
        return Ok(0.0);
    }
    let mut cuts = vec![a, b];
    let mut decade = 10f64.powf(a.log10().floor() + 1.0);
    while decade < b {
        cuts.push(decade);
        decade *= 10.0;
    }
    cuts.extend(metric.junctions().into_iter().filter(|&j| j > a && j < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let q = integrate(
            |x: f64| (x + ln_flux_integrand(metric, p, x)).exp(),
            pair[0].ln(),
            pair[1].ln(),
            TAIL_TOL,
        )?;
        total += q.value;
    }
    Ok(total)
}

/// `∫_R^∞ A^{-1/(p-1)} ds` by the substitution `s = R v^{-m}`, with `m`
/// chosen from the decay exponent `gamma` so the transformed integrand stays
/// bounded on `v ∈ (0, 1]`. Errors below `abs_floor` are accepted, since the
/// tail is only ever added to an integral of that scale.
fn transformed_tail(metric: &WarpedMetric, p: f64, radius: f64, gamma: f64, abs_floor: f64) -> Result<f64> {
    let gamma_m = 1.0 + 0.9 * (gamma - 1.0);
    let m = 1.0 / (gamma_m - 1.0);
    let ln_r = radius.ln();
    let q = integrate(
        |v: f64| {
            let ln_v = v.ln();
            let ln_s = ln_r - m * ln_v;
            let ln_f = ln_flux_integrand(metric, p, ln_s);
            if ln_f == f64::NEG_INFINITY || ln_f.is_nan() {
                return 0.0;
            }
            m * (ln_s - ln_v + ln_f).exp()
        },
        0.0,
        1.0,
        Tolerance::new(abs_floor, TAIL_TOL.rel),
    )?;
    Ok(q.value)
}

/// The radial p-Green function with unit flux, `∫_r^∞ A(s)^{-1/(p-1)} ds`.
pub fn green_tail(metric: &WarpedMetric, p: &PParam, r: f64) -> Result<f64> {
    let check = nonparabolicity_check(metric, p, r)?;
    if !check.exists {
        return Err(Error::Parabolic(format!(
            "{} with p = {}: fitted exponent {:?} vs critical {}",
            metric.family(),
            p.value(),
            check.fitted_exponent,
            check.critical_exponent
        )));
    }
    Ok(check.tail_integral.expect("set when convergent"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonParabolicity {
    pub exists: bool,
    pub tail_integral: Option<f64>,
    /// Asymptotic growth exponent of `w` fitted over the last decade.
    pub fitted_exponent: Option<f64>,
    /// `(p - 1) / 2`; the tail converges iff the growth exponent exceeds it.
    pub critical_exponent: f64,
}

/// Decide whether a positive p-Green function exists (`∫^∞ A^{-1/(p-1)} < ∞`).
pub fn nonparabolicity_check(metric: &WarpedMetric, p: &PParam, r0: f64) -> Result<NonParabolicity> {
    metric.check_domain(r0)?;
    let pv = p.value();
    let critical_exponent = (pv - 1.0) / 2.0;
    if metric.r_max().is_finite() {
        return Ok(NonParabolicity {
            exists: false,
            tail_integral: None,
            fitted_exponent: None,
            critical_exponent,
        });
    }
    let far = metric.far_radius().max(10.0 * r0);
    let alpha = fitted_exponent(metric, far);
    if !(alpha > critical_exponent) {
        return Ok(NonParabolicity {
            exists: false,
            tail_integral: None,
            fitted_exponent: Some(alpha),
            critical_exponent,
        });
    }
    let gamma = 2.0 * alpha / (pv - 1.0);
    let head = flux_integral(metric, pv, r0, far)?;
    let tail = head + transformed_tail(metric, pv, far, gamma, 1e-16 * head)?;
    Ok(NonParabolicity {
        exists: true,
        tail_integral: Some(tail),
        fitted_exponent: Some(alpha),
        critical_exponent,
    })
}
