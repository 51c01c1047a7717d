//! The radial p-Green function with unit flux and its level-set functionals.
//!
//! On a warped product the p-Laplace equation with a Dirac mass at the pole
//! reduces to `A(r) |û'|^{p-1} = 1`, so `û(r) = ∫_r^∞ A(s)^{-1/(p-1)} ds`.
//! The profile stores `û` on a logarithmic grid; off-grid values are obtained
//! by quadrature from the neighbouring node rather than by interpolation.

mod asymptotics;
mod levels;

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::geometry::{flux_integrand, green_tail, hessian_radial, PParam, RadialHessian, RadialJet, WarpedMetric};
use crate::geometry::radial_flux_integral;
use crate::numerics::log_space;
use crate::numerics::roots::safeguarded_newton;
use crate::table::fmt_float;

pub use asymptotics::{asymptotics_check, AsymptoticsRow, AsymptoticsTable};
pub use levels::{level_grid, LevelFunctionals, LevelSource, SyntheticLevels};

/// Grid used for a Green profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub r_min: f64,
    /// Outer radius; the metric's far radius when unset.
    pub r_cut: Option<f64>,
    pub points_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            r_cut: None,
            points_per_decade: 32,
        }
    }
}

fn check_model_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p < 3.0) {
        return Err(Error::InvalidExponent {
            p,
            reason: "model profile requires 1 < p < 3",
        });
    }
    Ok(())
}

fn model_constants(p: f64, r: f64) -> Result<(f64, f64)> {
    check_model_exponent(p)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let c = (3.0 - p) / (p - 1.0);
    let k = (4.0 * PI).powf(-1.0 / (p - 1.0)) / c;
    Ok((c, k))
}

/// Euclidean model `μ(r) = (4π)^{-1/(p-1)} ((p-1)/(3-p)) r^{-(3-p)/(p-1)}`.
pub fn mu_model(p: f64, r: f64) -> Result<f64> {
    let (c, k) = model_constants(p, r)?;
    Ok(k * r.powf(-c))
}

pub fn mu_model_prime(p: f64, r: f64) -> Result<f64> {
    let (c, k) = model_constants(p, r)?;
    Ok(-c * k * r.powf(-c - 1.0))
}

pub fn mu_model_second(p: f64, r: f64) -> Result<f64> {
    let (c, k) = model_constants(p, r)?;
    Ok(c * (c + 1.0) * k * r.powf(-c - 2.0))
}

/// Radial p-Green function sampled on a logarithmic grid.
#[derive(Debug, Clone)]
pub struct GreenProfile {
    metric: WarpedMetric,
    p: PParam,
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    tail_estimate: f64,
    flux_norm: f64,
}

/// Solve for the unit-flux radial p-Green function of `metric`.
pub fn solve_green(metric: &WarpedMetric, p: PParam, grid: GridSpec) -> Result<GreenProfile> {
    if !metric.pole_complete() {
        return Err(Error::NotPoleComplete);
    }
    if metric.r_max().is_finite() {
        return Err(Error::Parabolic(format!(
            "{} is bounded (r_max = {}); no decaying Green function",
            metric.family(),
            metric.r_max()
        )));
    }
    let r_cut = grid.r_cut.unwrap_or_else(|| metric.far_radius());
    if !(grid.r_min > 0.0 && r_cut > grid.r_min && grid.points_per_decade >= 1) {
        return Err(Error::InvalidArgument(format!(
            "grid needs 0 < r_min < r_cut, got ({}, {r_cut})",
            grid.r_min
        )));
    }
    metric.check_domain(grid.r_min)?;
    let tail = green_tail(metric, &p, r_cut)?;

    let decades = (r_cut / grid.r_min).log10();
    let n = ((decades * grid.points_per_decade as f64).ceil() as usize).max(2) + 1;
    let r = log_space(grid.r_min, r_cut, n);
    let mut u = vec![0.0; n];
    u[n - 1] = tail;
    for i in (0..n - 1).rev() {
        u[i] = u[i + 1] + radial_flux_integral(metric, p.value(), r[i], r[i + 1])?;
    }
    let du: Vec<f64> = r.iter().map(|&ri| -flux_integrand(metric, &p, ri)).collect();

    let mut flux_norm = 1.0;
    for (&ri, &di) in r.iter().zip(&du) {
        let flux = metric.area(ri) * di.abs().powf(p.value() - 1.0);
        if (flux - 1.0).abs() > (flux_norm - 1.0f64).abs() {
            flux_norm = flux;
        }
    }

    Ok(GreenProfile {
        metric: metric.clone(),
        p,
        r,
        u,
        du,
        tail_estimate: tail,
        flux_norm,
    })
}

impl GreenProfile {
    pub fn metric(&self) -> &WarpedMetric {
        &self.metric
    }

    pub fn p(&self) -> PParam {
        self.p
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.du
    }

    /// `û(r_cut)`, the part of the integral beyond the grid.
    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    /// Grid flux `A |û'|^{p-1}` farthest from 1.
    pub fn flux_norm(&self) -> f64 {
        self.flux_norm
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_cut(&self) -> f64 {
        *self.r.last().expect("grid has at least two points")
    }

    /// `(û(r_cut), û(r_min))`.
    pub fn level_range(&self) -> (f64, f64) {
        (*self.u.last().expect("non-empty"), self.u[0])
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= self.r_min() && r <= self.r_cut()) {
            return Err(Error::OutOfDomain { r, r_max: self.r_cut() });
        }
        Ok(())
    }

    fn segment(&self, r: f64) -> usize {
        let i = self.r.partition_point(|&x| x <= r);
        i.saturating_sub(1).min(self.r.len() - 2)
    }

    /// `û(r)` for `r ∈ [r_min, r_cut]`.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let i = self.segment(r);
        Ok(self.u[i + 1] + radial_flux_integral(&self.metric, self.p.value(), r, self.r[i + 1])?)
    }

    /// `|û'(r)| = A(r)^{-1/(p-1)}`.
    pub fn gradient_at(&self, r: f64) -> f64 {
        flux_integrand(&self.metric, &self.p, r)
    }

    /// `d|û'|/dr = -(2/(p-1)) (w'/w) |û'|`.
    pub fn gradient_slope_at(&self, r: f64) -> f64 {
        -2.0 / (self.p.value() - 1.0) * self.metric.dw(r) / self.metric.w(r) * self.gradient_at(r)
    }

    pub fn hessian_at(&self, r: f64) -> Result<RadialHessian> {
        hessian_radial(
            &self.metric,
            RadialJet {
                d1: -self.gradient_at(r),
                d2: -self.gradient_slope_at(r),
            },
            r,
        )
    }

    /// Radius of the level sphere `{û = t}`.
    pub fn invert_level(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.level_range();
        if !(t >= lo && t <= hi) {
            return Err(Error::LevelOutOfRange { t, lo, hi });
        }
        // u is strictly decreasing: find u[i] >= t >= u[i+1].
        let i = self.u.partition_point(|&v| v >= t).saturating_sub(1).min(self.r.len() - 2);
        if self.u[i] == t {
            return Ok(self.r[i]);
        }
        if self.u[i + 1] == t {
            return Ok(self.r[i + 1]);
        }
        let (x_lo, x_hi) = (self.r[i].ln(), self.r[i + 1].ln());
        let tol = 4.0 * f64::EPSILON * x_lo.abs().max(x_hi.abs()).max(1.0);
        let x = safeguarded_newton(
            |x| {
                let r = x.exp();
                let value = match self.value_at(r) {
                    Ok(v) => v,
                    Err(_) => f64::NAN,
                };
                (t - value, self.gradient_at(r) * r)
            },
            x_lo,
            x_hi,
            tol,
            200,
        )?;
        Ok(x.exp().clamp(self.r[i], self.r[i + 1]))
    }

    pub fn level_functionals(&self, t: f64) -> Result<LevelFunctionals> {
        let r_t = self.invert_level(t)?;
        let area = self.metric.area(r_t);
        let s = self.gradient_at(r_t);
        let pv = self.p.value();
        // Only the part of Σ_t with |∇û| > 0 contributes; radially that is all of it.
        let f = if s > 0.0 { area * s * s } else { 0.0 };
        Ok(LevelFunctionals {
            t,
            r_t,
            f,
            f_closed_form: area.powf((pv - 3.0) / (pv - 1.0)),
            area,
            flux: area * s.powf(pv - 1.0),
            monotone_quantity: f / t - self.p.flat_coefficient() * t,
        })
    }

    /// CSV with columns `r,u,du,A,F,flux,M` at every grid node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,u,du,A,F,flux,M")?;
        let pv = self.p.value();
        let coef = self.p.flat_coefficient();
        for ((&r, &u), &du) in self.r.iter().zip(&self.u).zip(&self.du) {
            let area = self.metric.area(r);
            let f = area * du * du;
            let flux = area * du.abs().powf(pv - 1.0);
            let m = f / u - coef * u;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_float(r),
                fmt_float(u),
                fmt_float(du),
                fmt_float(area),
                fmt_float(f),
                fmt_float(flux),
                fmt_float(m)
            )?;
        }
        Ok(())
    }
}

impl LevelSource for GreenProfile {
    fn p(&self) -> PParam {
        self.p
    }

    fn level_range(&self) -> (f64, f64) {
        GreenProfile::level_range(self)
    }

    fn functionals(&self, t: f64) -> Result<LevelFunctionals> {
        self.level_functionals(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat(p: f64) -> GreenProfile {
        solve_green(&WarpedMetric::euclidean(), PParam::new(p, false).unwrap(), GridSpec::default()).unwrap()
    }

    #[test]
    fn model_values() {
        assert_relative_eq!(mu_model(2.0, 1.0).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(mu_model(1.5, 1.0).unwrap(), 1.0 / (48.0 * PI * PI), max_relative = 1e-14);
        assert_relative_eq!(mu_model(2.0, 2.0).unwrap(), mu_model(2.0, 1.0).unwrap() / 2.0, max_relative = 1e-15);
        assert!(mu_model(3.0, 1.0).is_err());
        assert!(mu_model(2.0, 0.0).is_err());
    }

    #[test]
    fn model_derivatives_match_finite_differences() {
        for p in [1.2, 1.5, 2.0, 2.5] {
            let r = 0.7;
            let h = 1e-5;
            let fd1 = (mu_model(p, r + h).unwrap() - mu_model(p, r - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(mu_model_prime(p, r).unwrap(), fd1, max_relative = 1e-8);
            let fd2 = (mu_model_prime(p, r + h).unwrap() - mu_model_prime(p, r - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(mu_model_second(p, r).unwrap(), fd2, max_relative = 1e-8);
        }
    }

    #[test]
    fn flat_profile_is_the_model() {
        let g = flat(2.0);
        assert_relative_eq!(g.value_at(0.5).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-12);
        let g = flat(1.5);
        assert_relative_eq!(g.value_at(1.0).unwrap(), 1.0 / (48.0 * PI * PI), max_relative = 1e-12);
    }

    #[test]
    fn inversion_examples() {
        let g = flat(2.0);
        assert_relative_eq!(g.invert_level(1.0 / (4.0 * PI)).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(g.invert_level(1.0 / (8.0 * PI)).unwrap(), 2.0, max_relative = 1e-12);
        let (lo, hi) = g.level_range();
        assert!(matches!(g.invert_level(hi * 2.0), Err(Error::LevelOutOfRange { .. })));
        assert!(g.invert_level(lo / 2.0).is_err());
    }

    #[test]
    fn hyperbolic_inversion() {
        let h = solve_green(&WarpedMetric::hyperbolic(), PParam::new(2.0, false).unwrap(), GridSpec::default()).unwrap();
        let t = (1.0 / 1f64.tanh() - 1.0) / (4.0 * PI);
        assert_relative_eq!(h.invert_level(t).unwrap(), 1.0, max_relative = 1e-11);
    }

    #[test]
    fn level_functional_examples() {
        let g = flat(2.0);
        let lf = g.level_functionals(1.0 / (4.0 * PI)).unwrap();
        assert_relative_eq!(lf.f, 1.0 / (4.0 * PI), max_relative = 1e-11);
        assert!(lf.monotone_quantity.abs() < 1e-12);
        let g = flat(1.5);
        let lf = g.level_functionals(1.0 / (48.0 * PI * PI)).unwrap();
        assert_relative_eq!(lf.f, 1.0 / (64.0 * PI.powi(3)), max_relative = 1e-11);
        assert!(lf.monotone_quantity.abs() < 1e-10 * lf.f / lf.t);
        assert!((lf.flux - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_and_parabolic_metrics_are_rejected() {
        let p = PParam::new(2.0, false).unwrap();
        assert!(matches!(
            solve_green(&WarpedMetric::sphere(), p, GridSpec::default()),
            Err(Error::Parabolic(_))
        ));
        let slow = WarpedMetric::power_cap(0.4, 2.0).unwrap();
        assert!(matches!(solve_green(&slow, p, GridSpec::default()), Err(Error::Parabolic(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let g = flat(2.0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,u,du,A,F,flux,M"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first.len(), 7);
        assert_eq!(first[0], 1e-4);
        assert_eq!(text.lines().count(), g.radii().len() + 1);
    }
}
