//! Warp-function families and the name-keyed registry that builds them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::families;

/// A warp function `w` on `(0, r_max)` defining `g = dr² + w(r)² g_{S²}`.
pub trait Warp: Send + Sync + fmt::Debug {
    fn w(&self, r: f64) -> f64;
    fn dw(&self, r: f64) -> f64;
    fn d2w(&self, r: f64) -> f64;

    /// `ln w(e^x)`; families whose warp overflows for huge radii override this.
    fn ln_w(&self, ln_r: f64) -> f64 {
        self.w(ln_r.exp()).ln()
    }

    /// Upper end of the radial domain; `f64::INFINITY` for complete ends.
    fn r_max(&self) -> f64;

    /// `w(0) = 0` and `w'(0) = 1`, i.e. the metric closes smoothly at the pole.
    fn pole_complete(&self) -> bool;

    /// Outer radius used for default grids and asymptotic exponent fits.
    fn far_radius(&self) -> f64;

    /// Radii where `w'''` may jump; finite-difference stencils must not straddle them.
    fn junctions(&self) -> Vec<f64> {
        Vec::new()
    }

    /// True when the metric is exactly flat everywhere.
    fn is_flat(&self) -> bool {
        false
    }
}

/// Named parameters of a metric family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    /// `(r, w)` samples for tabulated warps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<[f64; 2]>,
}

impl MetricParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn with_table(mut self, table: Vec<[f64; 2]>) -> Self {
        self.table = table;
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub(crate) fn require(&self, family: &str, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| Error::InvalidMetric {
            family: family.to_string(),
            reason: format!("missing parameter `{key}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::InvalidMetric {
                family: family.to_string(),
                reason: format!("parameter `{key}` is not finite"),
            });
        }
        Ok(v)
    }
}

/// Builds warps of one family from parameters.
pub trait MetricFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: &MetricParams) -> Result<Arc<dyn Warp>>;
}

/// Name-keyed collection of metric families.
pub struct MetricRegistry {
    families: BTreeMap<&'static str, Box<dyn MetricFamily>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in family.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(families::EuclideanFamily));
        reg.register(Box::new(families::SphereFamily));
        reg.register(Box::new(families::HyperbolicFamily));
        reg.register(Box::new(families::PowerCapFamily));
        reg.register(Box::new(families::CustomTableFamily));
        reg
    }

    /// Shared registry of built-in families.
    pub fn builtin() -> &'static MetricRegistry {
        static REGISTRY: OnceLock<MetricRegistry> = OnceLock::new();
        REGISTRY.get_or_init(MetricRegistry::with_builtins)
    }

    pub fn register(&mut self, family: Box<dyn MetricFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.families.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }

    pub fn build(&self, name: &str, params: &MetricParams) -> Result<super::WarpedMetric> {
        let family = self
            .families
            .get(name)
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
        let warp = family.build(params)?;
        Ok(super::WarpedMetric::from_parts(name, params.clone(), warp))
    }
}
