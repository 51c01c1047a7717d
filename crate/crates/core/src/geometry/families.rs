use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::tridiag::solve_tridiagonal;

use super::family::{MetricFamily, MetricParams, Warp};

fn invalid(family: &str, reason: impl Into<String>) -> Error {
    Error::InvalidMetric {
        family: family.to_string(),
        reason: reason.into(),
    }
}

/// Flat space, `w = r`.
#[derive(Debug)]
pub struct Euclidean;

impl Warp for Euclidean {
    fn w(&self, r: f64) -> f64 {
        r
    }
    fn dw(&self, _r: f64) -> f64 {
        1.0
    }
    fn d2w(&self, _r: f64) -> f64 {
        0.0
    }
    fn ln_w(&self, ln_r: f64) -> f64 {
        ln_r
    }
    fn r_max(&self) -> f64 {
        f64::INFINITY
    }
    fn pole_complete(&self) -> bool {
        true
    }
    fn far_radius(&self) -> f64 {
        1e4
    }
    fn is_flat(&self) -> bool {
        true
    }
}

pub struct EuclideanFamily;

impl MetricFamily for EuclideanFamily {
    fn name(&self) -> &'static str {
        "euclidean"
    }
    fn build(&self, _params: &MetricParams) -> Result<Arc<dyn Warp>> {
        Ok(Arc::new(Euclidean))
    }
}

/// Unit round 3-sphere, `w = sin r` on `(0, π)`.
#[derive(Debug)]
pub struct Sphere;

impl Warp for Sphere {
    fn w(&self, r: f64) -> f64 {
        r.sin()
    }
    fn dw(&self, r: f64) -> f64 {
        r.cos()
    }
    fn d2w(&self, r: f64) -> f64 {
        -r.sin()
    }
    fn r_max(&self) -> f64 {
        PI
    }
    fn pole_complete(&self) -> bool {
        true
    }
    fn far_radius(&self) -> f64 {
        PI
    }
}

pub struct SphereFamily;

impl MetricFamily for SphereFamily {
    fn name(&self) -> &'static str {
        "sphere"
    }
    fn build(&self, _params: &MetricParams) -> Result<Arc<dyn Warp>> {
        Ok(Arc::new(Sphere))
    }
}

/// Hyperbolic 3-space, `w = sinh r`.
#[derive(Debug)]
pub struct Hyperbolic;

impl Warp for Hyperbolic {
    fn w(&self, r: f64) -> f64 {
        r.sinh()
    }
    fn dw(&self, r: f64) -> f64 {
        r.cosh()
    }
    fn d2w(&self, r: f64) -> f64 {
        r.sinh()
    }
    fn r_max(&self) -> f64 {
        f64::INFINITY
    }
    fn pole_complete(&self) -> bool {
        true
    }
    fn far_radius(&self) -> f64 {
        // A^{-1/(p-1)} is already ~e^{-40/(p-1)} here.
        20.0
    }
}

pub struct HyperbolicFamily;

impl MetricFamily for HyperbolicFamily {
    fn name(&self) -> &'static str {
        "hyperbolic"
    }
    fn build(&self, _params: &MetricParams) -> Result<Arc<dyn Warp>> {
        Ok(Arc::new(Hyperbolic))
    }
}

/// Flat core `w = r` on `(0, r₁]`, a smoothstep ramp of `w''` on `[r₁, r₂]`,
/// and the concave power `a r^α + b` beyond `r₂`.
///
/// The pieces match to second order at both junctions; `w'' ≤ 0` and
/// `0 < w' ≤ 1` hold everywhere, so the scalar curvature is nonnegative.
#[derive(Debug, Clone)]
pub struct PowerCap {
    pub alpha: f64,
    pub ramp_start: f64,
    pub transition: f64,
    pub a: f64,
    pub b: f64,
    /// `w''` at the end of the ramp.
    curvature_end: f64,
}

impl PowerCap {
    pub fn new(alpha: f64, ramp_start: f64, transition: f64) -> Result<Self> {
        let family = "power_cap";
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(family, format!("alpha = {alpha} must lie in (0, 1)")));
        }
        if !(transition > 0.0 && transition.is_finite()) {
            return Err(invalid(family, format!("transition = {transition} must be positive")));
        }
        if !(ramp_start > 0.0 && ramp_start < transition) {
            return Err(invalid(
                family,
                format!("ramp_start = {ramp_start} must lie in (0, transition)"),
            ));
        }
        let len = transition - ramp_start;
        // w'(r₂) = a α r₂^{α-1} solves w'(r₂) = 1 + w''(r₂)·len/2 with w''(r₂) = w'(r₂)(α-1)/r₂.
        let slope_end = 1.0 / (1.0 + (1.0 - alpha) * len / (2.0 * transition));
        let a = slope_end / (alpha * transition.powf(alpha - 1.0));
        let curvature_end = slope_end * (alpha - 1.0) / transition;
        let w_end = transition + curvature_end * len * len * 3.0 / 20.0;
        let b = w_end - a * transition.powf(alpha);
        Ok(Self {
            alpha,
            ramp_start,
            transition,
            a,
            b,
            curvature_end,
        })
    }

    fn ramp_len(&self) -> f64 {
        self.transition - self.ramp_start
    }
}

impl Warp for PowerCap {
    fn w(&self, r: f64) -> f64 {
        if r <= self.ramp_start {
            r
        } else if r < self.transition {
            let len = self.ramp_len();
            let x = (r - self.ramp_start) / len;
            let x4 = x * x * x * x;
            self.ramp_start + len * x + self.curvature_end * len * len * (x4 / 4.0 - x4 * x / 10.0)
        } else {
            self.a * r.powf(self.alpha) + self.b
        }
    }

    fn dw(&self, r: f64) -> f64 {
        if r <= self.ramp_start {
            1.0
        } else if r < self.transition {
            let len = self.ramp_len();
            let x = (r - self.ramp_start) / len;
            let x3 = x * x * x;
            1.0 + self.curvature_end * len * (x3 - x3 * x / 2.0)
        } else {
            self.a * self.alpha * r.powf(self.alpha - 1.0)
        }
    }

    fn d2w(&self, r: f64) -> f64 {
        if r <= self.ramp_start {
            0.0
        } else if r < self.transition {
            let x = (r - self.ramp_start) / self.ramp_len();
            self.curvature_end * x * x * (3.0 - 2.0 * x)
        } else {
            self.a * self.alpha * (self.alpha - 1.0) * r.powf(self.alpha - 2.0)
        }
    }

    fn ln_w(&self, ln_r: f64) -> f64 {
        if ln_r < self.transition.ln() {
            return self.w(ln_r.exp()).ln();
        }
        let ln_lead = self.a.ln() + self.alpha * ln_r;
        ln_lead + (self.b * (-ln_lead).exp()).ln_1p()
    }
    fn r_max(&self) -> f64 {
        f64::INFINITY
    }
    fn pole_complete(&self) -> bool {
        true
    }
    fn far_radius(&self) -> f64 {
        1e4 * self.transition.max(1.0)
    }
    fn junctions(&self) -> Vec<f64> {
        vec![self.ramp_start, self.transition]
    }
}

/// Parameters: `alpha`, `transition` (start of the pure power),
/// optional `ramp_start` (default `transition / 2`) and optional `p`; when `p`
/// is given, `alpha` must exceed `(p-1)/2` so the metric is p-nonparabolic.
pub struct PowerCapFamily;

impl MetricFamily for PowerCapFamily {
    fn name(&self) -> &'static str {
        "power_cap"
    }

    fn build(&self, params: &MetricParams) -> Result<Arc<dyn Warp>> {
        let alpha = params.require(self.name(), "alpha")?;
        let transition = params.require(self.name(), "transition")?;
        let ramp_start = params.get("ramp_start").unwrap_or(0.5 * transition);
        if let Some(p) = params.get("p") {
            if !(alpha > (p - 1.0) / 2.0) {
                return Err(invalid(
                    self.name(),
                    format!("alpha = {alpha} must exceed (p-1)/2 = {} for p = {p}", (p - 1.0) / 2.0),
                ));
            }
        }
        Ok(Arc::new(PowerCap::new(alpha, ramp_start, transition)?))
    }
}

/// Natural cubic spline through tabulated `(r, w)` samples.
#[derive(Debug, Clone)]
pub struct CustomTable {
    r: Vec<f64>,
    w: Vec<f64>,
    // Second derivatives at the knots.
    m: Vec<f64>,
}

impl CustomTable {
    pub fn new(table: &[[f64; 2]]) -> Result<Self> {
        let family = "custom_table";
        if table.len() < 4 {
            return Err(invalid(family, "at least 4 samples required"));
        }
        let r: Vec<f64> = table.iter().map(|e| e[0]).collect();
        let w: Vec<f64> = table.iter().map(|e| e[1]).collect();
        if r.iter().chain(w.iter()).any(|v| !v.is_finite()) {
            return Err(invalid(family, "non-finite sample"));
        }
        if r[0] < 0.0 {
            return Err(invalid(family, "radii must be nonnegative"));
        }
        if r.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid(family, "radii must be strictly increasing"));
        }
        for (i, (&ri, &wi)) in r.iter().zip(&w).enumerate() {
            let pole = i == 0 && ri == 0.0 && wi == 0.0;
            if wi <= 0.0 && !pole {
                return Err(invalid(family, format!("w must be positive (w({ri}) = {wi})")));
            }
        }
        let n = r.len();
        let h: Vec<f64> = r.windows(2).map(|p| p[1] - p[0]).collect();
        let inner = n - 2;
        let diag: Vec<f64> = (0..inner).map(|i| 2.0 * (h[i] + h[i + 1])).collect();
        let off: Vec<f64> = (0..inner.saturating_sub(1)).map(|i| h[i + 1]).collect();
        let rhs: Vec<f64> = (0..inner)
            .map(|i| 6.0 * ((w[i + 2] - w[i + 1]) / h[i + 1] - (w[i + 1] - w[i]) / h[i]))
            .collect();
        let interior = solve_tridiagonal(&off, &diag, &off, &rhs)?;
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&interior);
        Ok(Self { r, w, m })
    }

    fn segment(&self, r: f64) -> usize {
        let n = self.r.len();
        match self.r.binary_search_by(|probe| probe.total_cmp(&r)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let i = self.segment(r);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - r) / h;
        let b = (r - self.r[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (w0, w1) = (self.w[i], self.w[i + 1]);
        let value = a * w0 + b * w1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (w1 - w0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let curv = a * m0 + b * m1;
        (value, slope, curv)
    }
}

impl Warp for CustomTable {
    fn w(&self, r: f64) -> f64 {
        self.eval(r).0
    }
    fn dw(&self, r: f64) -> f64 {
        self.eval(r).1
    }
    fn d2w(&self, r: f64) -> f64 {
        self.eval(r).2
    }
    fn r_max(&self) -> f64 {
        *self.r.last().expect("validated non-empty")
    }
    fn pole_complete(&self) -> bool {
        self.r[0] == 0.0 && self.w[0] == 0.0 && (self.eval(0.0).1 - 1.0).abs() < 1e-6
    }
    fn far_radius(&self) -> f64 {
        self.r_max()
    }
    fn junctions(&self) -> Vec<f64> {
        self.r.clone()
    }
}

pub struct CustomTableFamily;

impl MetricFamily for CustomTableFamily {
    fn name(&self) -> &'static str {
        "custom_table"
    }
    fn build(&self, params: &MetricParams) -> Result<Arc<dyn Warp>> {
        Ok(Arc::new(CustomTable::new(&params.table)?))
    }
}
