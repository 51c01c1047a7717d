//! Rotationally symmetric 3-metrics `g = dr² + w(r)² g_{S²}` and the
//! curvature and level-sphere quantities derived from the warp `w`.

mod families;
mod family;
mod radial;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use families::{CustomTable, Euclidean, Hyperbolic, PowerCap, Sphere};
pub use family::{MetricFamily, MetricParams, MetricRegistry, Warp};
pub use radial::{flux_integrand, green_tail, nonparabolicity_check, NonParabolicity};
pub(crate) use radial::flux_integral as radial_flux_integral;

/// The exponent `p` of the p-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PParam {
    p: f64,
    smooth_override: bool,
}

impl PParam {
    /// `1 < p ≤ 2`, or `1 < p < 3` when `smooth_override` is set.
    pub fn new(p: f64, smooth_override: bool) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidExponent {
                p,
                reason: "p must exceed 1",
            });
        }
        if smooth_override {
            if p >= 3.0 {
                return Err(Error::InvalidExponent {
                    p,
                    reason: "p must be below 3",
                });
            }
        } else if p > 2.0 {
            return Err(Error::InvalidExponent {
                p,
                reason: "p above 2 requires the smooth override",
            });
        }
        Ok(Self { p, smooth_override })
    }

    pub fn value(&self) -> f64 {
        self.p
    }

    pub fn smooth_override(&self) -> bool {
        self.smooth_override
    }

    /// `(3 - p) / (p - 1)`.
    pub fn c_p(&self) -> f64 {
        (3.0 - self.p) / (self.p - 1.0)
    }

    /// `4π c_p²`, the flat-space coefficient in `F = 4π c_p² t²`.
    pub fn flat_coefficient(&self) -> f64 {
        let c = self.c_p();
        4.0 * PI * c * c
    }
}

/// A warped-product metric built by a registered family.
#[derive(Clone)]
pub struct WarpedMetric {
    family: String,
    params: MetricParams,
    warp: Arc<dyn Warp>,
}

impl fmt::Debug for WarpedMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedMetric")
            .field("family", &self.family)
            .field("params", &self.params)
            .finish()
    }
}

/// Build a metric of a built-in family.
pub fn make_metric(family: &str, params: &MetricParams) -> Result<WarpedMetric> {
    MetricRegistry::builtin().build(family, params)
}

impl WarpedMetric {
    pub fn from_parts(family: &str, params: MetricParams, warp: Arc<dyn Warp>) -> Self {
        Self {
            family: family.to_string(),
            params,
            warp,
        }
    }

    pub fn euclidean() -> Self {
        make_metric("euclidean", &MetricParams::new()).expect("built-in family")
    }

    pub fn hyperbolic() -> Self {
        make_metric("hyperbolic", &MetricParams::new()).expect("built-in family")
    }

    pub fn sphere() -> Self {
        make_metric("sphere", &MetricParams::new()).expect("built-in family")
    }

    pub fn power_cap(alpha: f64, transition: f64) -> Result<Self> {
        make_metric(
            "power_cap",
            &MetricParams::new().with("alpha", alpha).with("transition", transition),
        )
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    pub fn warp(&self) -> &dyn Warp {
        self.warp.as_ref()
    }

    pub fn w(&self, r: f64) -> f64 {
        self.warp.w(r)
    }

    pub fn dw(&self, r: f64) -> f64 {
        self.warp.dw(r)
    }

    pub fn d2w(&self, r: f64) -> f64 {
        self.warp.d2w(r)
    }

    pub fn ln_w(&self, ln_r: f64) -> f64 {
        self.warp.ln_w(ln_r)
    }

    /// Area of the geodesic sphere of radius `r`, `4π w(r)²`.
    pub fn area(&self, r: f64) -> f64 {
        let w = self.warp.w(r);
        4.0 * PI * w * w
    }

    /// `dA/dr = 8π w w'`.
    pub fn darea(&self, r: f64) -> f64 {
        8.0 * PI * self.warp.w(r) * self.warp.dw(r)
    }

    pub fn r_max(&self) -> f64 {
        self.warp.r_max()
    }

    pub fn pole_complete(&self) -> bool {
        self.warp.pole_complete()
    }

    pub fn far_radius(&self) -> f64 {
        self.warp.far_radius()
    }

    pub fn junctions(&self) -> Vec<f64> {
        self.warp.junctions()
    }

    pub fn is_flat(&self) -> bool {
        self.warp.is_flat()
    }

    pub fn check_domain(&self, r: f64) -> Result<()> {
        let r_max = self.r_max();
        if !(r > 0.0 && r < r_max) {
            return Err(Error::OutOfDomain { r, r_max });
        }
        let w = self.w(r);
        if !(w > 0.0) {
            return Err(Error::DegenerateWarp { r, w });
        }
        Ok(())
    }
}

/// Curvature of the metric and of the level sphere at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub r: f64,
    pub scalar: f64,
    /// `Ric(∂_r, ∂_r)`.
    pub ric_radial: f64,
    /// Ricci eigenvalue on the tangent space of the sphere.
    pub ric_tangential: f64,
    /// Mean curvature of the `r`-sphere (trace of its second fundamental form).
    pub mean_curvature: f64,
    pub area: f64,
}

pub fn curvature_at(metric: &WarpedMetric, r: f64) -> Result<CurvatureSample> {
    metric.check_domain(r)?;
    let (w, dw, d2w) = (metric.w(r), metric.dw(r), metric.d2w(r));
    let radial_sec = -d2w / w;
    let sphere_sec = (1.0 - dw * dw) / (w * w);
    Ok(CurvatureSample {
        r,
        scalar: 2.0 * sphere_sec + 4.0 * radial_sec,
        ric_radial: 2.0 * radial_sec,
        ric_tangential: radial_sec + sphere_sec,
        mean_curvature: 2.0 * dw / w,
        area: 4.0 * PI * w * w,
    })
}

/// First and second radial derivatives of a radial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub d1: f64,
    pub d2: f64,
}

/// Orthonormal-frame Hessian of a radial function; off-diagonal entries vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialHessian {
    /// `∇²f(∂_r, ∂_r)`.
    pub rad: f64,
    /// `∇²f(e, e)` for either unit tangent `e` of the sphere.
    pub tan: f64,
}

impl RadialHessian {
    pub fn laplacian(&self) -> f64 {
        self.rad + 2.0 * self.tan
    }

    pub fn norm_sq(&self) -> f64 {
        self.rad * self.rad + 2.0 * self.tan * self.tan
    }
}

pub fn hessian_radial(metric: &WarpedMetric, jet: RadialJet, r: f64) -> Result<RadialHessian> {
    metric.check_domain(r)?;
    Ok(RadialHessian {
        rad: jet.d2,
        tan: jet.d1 * metric.dw(r) / metric.w(r),
    })
}

/// Curvature bounds certified on a sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub samples: usize,
    pub min_scalar: f64,
    pub min_ricci: f64,
    /// Smallest `k ≥ 0` with `Ric ≥ -k` on the samples.
    pub ricci_lower_bound: f64,
}

impl Certification {
    /// Scalar curvature nonnegative up to roundoff.
    pub fn nonnegative_scalar(&self) -> bool {
        self.min_scalar >= -1e-12
    }
}

pub fn certify(metric: &WarpedMetric, radii: &[f64]) -> Result<Certification> {
    let mut min_scalar = f64::INFINITY;
    let mut min_ricci = f64::INFINITY;
    for &r in radii {
        let c = curvature_at(metric, r)?;
        min_scalar = min_scalar.min(c.scalar);
        min_ricci = min_ricci.min(c.ric_radial.min(c.ric_tangential));
    }
    Ok(Certification {
        samples: radii.len(),
        min_scalar,
        min_ricci,
        ricci_lower_bound: (-min_ricci).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pparam_ranges() {
        assert!(PParam::new(1.5, false).is_ok());
        assert!(PParam::new(2.0, false).is_ok());
        assert!(PParam::new(2.5, false).is_err());
        assert!(PParam::new(2.5, true).is_ok());
        assert!(PParam::new(3.0, true).is_err());
        assert!(PParam::new(1.0, false).is_err());
        assert!(PParam::new(f64::NAN, true).is_err());
        assert_relative_eq!(PParam::new(1.5, false).unwrap().c_p(), 3.0);
    }

    #[test]
    fn flat_model_values() {
        let m = WarpedMetric::euclidean();
        assert_eq!((m.w(1.0), m.dw(1.0), m.d2w(1.0)), (1.0, 1.0, 0.0));
        let c = curvature_at(&m, 2.0).unwrap();
        assert_eq!(c.scalar, 0.0);
        assert_eq!(c.mean_curvature, 1.0);
    }

    #[test]
    fn hyperbolic_warp_matches_series() {
        // sinh 1 = Σ 1/(2k+1)!
        let mut series = 0.0;
        let mut term = 1.0;
        for k in 0..20 {
            series += term;
            term /= ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        let m = WarpedMetric::hyperbolic();
        assert_relative_eq!(m.w(1.0), series, max_relative = 1e-15);
        assert_relative_eq!(m.w(1.0), 1.175_201_193_643_801_4, max_relative = 1e-15);
    }

    #[test]
    fn space_form_scalar_curvatures() {
        let s = curvature_at(&WarpedMetric::sphere(), std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(s.scalar, 6.0, max_relative = 1e-15);
        for r in [0.3, 1.0, 4.0] {
            let h = curvature_at(&WarpedMetric::hyperbolic(), r).unwrap();
            assert_relative_eq!(h.scalar, -6.0, max_relative = 1e-12);
            assert_relative_eq!(h.ric_radial, -2.0, max_relative = 1e-12);
            assert_relative_eq!(h.ric_tangential, -2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let s = WarpedMetric::sphere();
        assert!(matches!(curvature_at(&s, 4.0), Err(Error::OutOfDomain { .. })));
        assert!(curvature_at(&s, 0.0).is_err());
        assert!(hessian_radial(&s, RadialJet { d1: 1.0, d2: 0.0 }, -1.0).is_err());
    }

    #[test]
    fn hessian_examples() {
        let e = WarpedMetric::euclidean();
        // f = r²/2
        let h = hessian_radial(&e, RadialJet { d1: 3.0, d2: 1.0 }, 3.0).unwrap();
        assert_eq!((h.rad, h.tan), (1.0, 1.0));
        // f = μ for p = 1.5: μ ∝ r^{-3}
        let mu = 1.0 / (48.0 * PI * PI);
        let h = hessian_radial(&e, RadialJet { d1: -3.0 * mu, d2: 12.0 * mu }, 1.0).unwrap();
        assert_relative_eq!(h.tan / h.rad, -0.25, max_relative = 1e-15);
        // f = cosh r on hyperbolic space: ∇²f = f g
        let hy = WarpedMetric::hyperbolic();
        let h = hessian_radial(&hy, RadialJet { d1: 1f64.sinh(), d2: 1f64.cosh() }, 1.0).unwrap();
        assert_relative_eq!(h.rad, 1f64.cosh(), max_relative = 1e-15);
        assert_relative_eq!(h.tan, 1f64.cosh(), max_relative = 1e-15);
    }

    #[test]
    fn unknown_family() {
        assert!(matches!(
            make_metric("torus", &MetricParams::new()),
            Err(Error::UnknownFamily(_))
        ));
    }
}
