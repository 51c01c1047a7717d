//! Experiment configuration, read from JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use pgreen_core::geometry::{make_metric, MetricParams, MetricRegistry, PParam, WarpedMetric};
use pgreen_core::green::GridSpec;
use pgreen_core::monotonicity::{lambda_for_beta, ClaimId, LambdaBeta, Tolerances};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    /// Parse error with position, from serde_json.
    Parse(PathBuf, serde_json::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            ConfigError::Parse(path, e) => write!(f, "{}: line {}, column {}: {e}", path.display(), e.line(), e.column()),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// Identifier used in file names and tables; derived from the family when absent.
    #[serde(default)]
    pub id: Option<String>,
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

impl MetricSpec {
    pub fn id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        let mut id = self.family.clone();
        for (k, v) in &self.params {
            id.push_str(&format!("-{k}{v}"));
        }
        id
    }

    pub fn build(&self) -> pgreen_core::Result<WarpedMetric> {
        let params = MetricParams {
            values: self.params.clone(),
            table: self.table.clone(),
        };
        make_metric(&self.family, &params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelSpec {
    pub count: usize,
    /// Fraction of the log-width of the level range left free at each end.
    pub margin: f64,
    /// Random shift of each interior level, as a fraction of the log spacing.
    pub jitter: f64,
}

impl Default for LevelSpec {
    fn default() -> Self {
        Self {
            count: 128,
            margin: 0.02,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_cut: Option<f64>,
    pub points_per_decade: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            r_min: g.r_min,
            r_cut: g.r_cut,
            points_per_decade: g.points_per_decade,
        }
    }
}

impl From<GridConfig> for GridSpec {
    fn from(g: GridConfig) -> Self {
        GridSpec {
            r_min: g.r_min,
            r_cut: g.r_cut,
            points_per_decade: g.points_per_decade,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Root {
    Minus,
    Plus,
}

/// The `(λ, β)` pair for the generalized claims; the default pair when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralizedSpec {
    pub beta: f64,
    #[serde(default = "default_root")]
    pub root: Root,
}

fn default_root() -> Root {
    Root::Minus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub name: String,
    /// Nodes for shooting, cells for energy minimization.
    pub resolution: usize,
    /// Cell counts for the energy-vs-shooting comparison; skipped when empty.
    pub cross_validation: Vec<usize>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            name: "shooting".into(),
            resolution: 257,
            cross_validation: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub metrics: Vec<MetricSpec>,
    pub p: Vec<f64>,
    /// Admit `2 < p < 3`, where the radial profiles are smooth anyway.
    #[serde(default)]
    pub smooth_override: bool,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "default_annulus")]
    pub annulus: [f64; 2],
    #[serde(default)]
    pub levels: LevelSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub claims: Vec<ClaimId>,
    #[serde(default)]
    pub generalized: Option<GeneralizedSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_annulus() -> [f64; 2] {
    [0.5, 2.0]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(PathBuf::from("<inline>"), e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.metrics.is_empty() {
            return invalid("field `metrics`: at least one metric is required".into());
        }
        let registry = MetricRegistry::builtin();
        let mut ids = std::collections::BTreeSet::new();
        for (i, m) in self.metrics.iter().enumerate() {
            if !registry.contains(&m.family) {
                return invalid(format!(
                    "field `metrics[{i}].family`: unknown family `{}` (known: {})",
                    m.family,
                    registry.names().join(", ")
                ));
            }
            if !ids.insert(m.id()) {
                return invalid(format!("field `metrics[{i}]`: duplicate metric id `{}`", m.id()));
            }
        }
        if self.p.is_empty() {
            return invalid("field `p`: at least one exponent is required".into());
        }
        for (i, &p) in self.p.iter().enumerate() {
            if let Err(e) = PParam::new(p, self.smooth_override) {
                return invalid(format!("field `p[{i}]`: {e}"));
            }
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return invalid("field `eps`: values must be positive and finite".into());
        }
        if !(self.annulus[0] > 0.0 && self.annulus[1] > self.annulus[0]) {
            return invalid(format!("field `annulus`: need 0 < r_a < r_b, got {:?}", self.annulus));
        }
        if self.levels.count < 2 {
            return invalid("field `levels.count`: at least 2 levels are required".into());
        }
        if !(0.0..0.5).contains(&self.levels.margin) {
            return invalid("field `levels.margin`: must lie in [0, 0.5)".into());
        }
        if !(0.0..0.5).contains(&self.levels.jitter) {
            return invalid("field `levels.jitter`: must lie in [0, 0.5)".into());
        }
        if let Some(g) = self.generalized {
            for &p in &self.p {
                if let Err(e) = self.lambda_beta_for(p, Some(g)) {
                    return invalid(format!("field `generalized`: {e}"));
                }
            }
        }
        Ok(())
    }

    pub fn lambda_beta(&self, p: f64) -> pgreen_core::Result<LambdaBeta> {
        self.lambda_beta_for(p, self.generalized)
    }

    fn lambda_beta_for(&self, p: f64, spec: Option<GeneralizedSpec>) -> pgreen_core::Result<LambdaBeta> {
        match spec {
            None => Ok(LambdaBeta::default_pair(p)),
            Some(g) => {
                let (minus, plus) = lambda_for_beta(p, g.beta)?;
                let lb = if g.root == Root::Minus { minus } else { plus };
                if !lb.admissible {
                    return Err(pgreen_core::Error::InvalidArgument(format!(
                        "(λ, β) = ({}, {}) is not admissible at p = {p}",
                        lb.lambda, lb.beta
                    )));
                }
                Ok(lb)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_json(r#"{"metrics": [{"family": "euclidean"}], "p": [1.5]}"#).unwrap();
        assert_eq!(cfg.levels.count, 128);
        assert_eq!(cfg.metrics[0].id(), "euclidean");
        assert!(cfg.claims.is_empty());
    }

    #[test]
    fn reports_position_of_parse_errors() {
        let err = ExperimentConfig::from_json("{\n  \"metrics\": [],\n  \"bogus\": 1\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn rejects_unknown_family_and_bad_p() {
        let e = ExperimentConfig::from_json(r#"{"metrics": [{"family": "torus"}], "p": [1.5]}"#).unwrap_err();
        assert!(e.to_string().contains("metrics[0].family"));
        let e = ExperimentConfig::from_json(r#"{"metrics": [{"family": "euclidean"}], "p": [2.5]}"#).unwrap_err();
        assert!(e.to_string().contains("p[0]"));
        assert!(ExperimentConfig::from_json(r#"{"metrics": [{"family": "euclidean"}], "p": [2.5], "smooth_override": true}"#).is_ok());
    }

    #[test]
    fn metric_ids() {
        let m = MetricSpec {
            id: None,
            family: "power_cap".into(),
            params: [("alpha".to_string(), 0.8), ("transition".to_string(), 2.0)].into_iter().collect(),
            table: vec![],
        };
        assert_eq!(m.id(), "power_cap-alpha0.8-transition2");
    }
}
