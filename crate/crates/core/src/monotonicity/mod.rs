//! Level-set monotonicity, comparison and rigidity checks for `F(t)`.
//!
//! Every checker evaluates signed margins that are nonnegative when the
//! inequality holds, normalizes them by the size of the terms involved and
//! collects those below `-tolerance` as violations.

mod checks;
mod rigidity;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{certify, Certification, PParam};
use crate::green::GreenProfile;

pub use checks::{
    check_corollary_c, check_corollary_cd, check_corollary_d, check_generalized, check_theorem_a, check_theorem_b,
    log_derivative,
};
pub use rigidity::{rigidity_diagnostics, RigidityLevel, RigidityReport};

/// A pair `(λ, β)` for the generalized monotone quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBeta {
    pub p: f64,
    pub beta: f64,
    pub lambda: f64,
    pub admissible: bool,
    /// `λ²(5-p)/(4(3-p)) - λ(5-p)(β+1)/(2(3-p)) + β(β+1)`.
    pub exact_constraint_residual: f64,
}

/// Relative tolerance on the constraint residual for admissibility.
const CONSTRAINT_TOL: f64 = 1e-12;

impl LambdaBeta {
    pub fn new(p: f64, beta: f64, lambda: f64) -> Self {
        let a = (5.0 - p) / (3.0 - p);
        let residual = lambda * lambda * a / 4.0 - lambda * a * (beta + 1.0) / 2.0 + beta * (beta + 1.0);
        let admissible = beta > 1.0
            && lambda > 0.0
            && (5.0 - p) + (3.0 * p - 7.0) * beta >= 0.0
            && residual.abs() <= CONSTRAINT_TOL * beta * (beta + 1.0);
        Self {
            p,
            beta,
            lambda,
            admissible,
            exact_constraint_residual: residual,
        }
    }

    /// `(λ, β) = (2, 2/(3-p))`, for which the generalized quantity is `𝔐`.
    pub fn default_pair(p: f64) -> Self {
        Self::new(p, 2.0 / (3.0 - p), 2.0)
    }

    pub fn is_default_pair(&self) -> bool {
        (self.lambda - 2.0).abs() <= 1e-14 && (self.beta - 2.0 / (3.0 - self.p)).abs() <= 1e-14 * self.beta
    }

    /// `β - λ(5-p)/(2(3-p))`.
    pub fn exponent(&self) -> f64 {
        self.beta - self.lambda * (5.0 - self.p) / (2.0 * (3.0 - self.p))
    }

    /// `((3-p)/(p-1)) 4π/(β-1)`, the slope of the bound on `𝓖`.
    pub fn g_bound_coefficient(&self) -> f64 {
        (3.0 - self.p) / (self.p - 1.0) * 4.0 * PI / (self.beta - 1.0)
    }

    /// Coefficient of `t^{exponent+2}` in `𝓘`.
    pub fn i_coefficient(&self) -> f64 {
        self.g_bound_coefficient() / (self.exponent() + 2.0)
    }
}

/// Both roots `(λ₋, λ₊)` of the admissibility constraint for given `β`.
pub fn lambda_for_beta(p: f64, beta: f64) -> Result<(LambdaBeta, LambdaBeta)> {
    if !(p > 1.0 && p < 3.0) {
        return Err(Error::InvalidExponent {
            p,
            reason: "generalized family requires 1 < p < 3",
        });
    }
    let b1 = beta + 1.0;
    let product = 4.0 * beta * b1 * (3.0 - p) / (5.0 - p);
    let disc = b1 * b1 - product;
    if !(disc >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "no real λ for β = {beta} at p = {p} (discriminant {disc:e})"
        )));
    }
    let plus = b1 + disc.sqrt();
    // Product of the roots; avoids cancellation in (β+1) - √disc.
    let minus = product / plus;
    Ok((LambdaBeta::new(p, beta, minus), LambdaBeta::new(p, beta, plus)))
}

/// Claims that can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClaimId {
    /// `F'(t) ≤ 4π c_p² t + F/t`.
    T1a,
    /// `𝔐(t) = F/t - 4π c_p² t` non-increasing.
    T1b,
    /// `𝔐` non-increasing with `F` restricted to `{|∇û| > 0}`.
    T2,
    /// `𝓖(t) ≤ ((3-p)/(p-1)) 4π t/(β-1)`.
    T4G,
    /// `𝓘(t)` non-increasing.
    T4I,
    /// `F(t) ≤ 4π c_p² t²`.
    C1c,
    /// `Area(Σ_t) ≥ (4π c_p² t²)^{-(p-1)/(3-p)}`.
    C1d,
    /// Flat-space equality diagnostics.
    #[serde(rename = "RIGID")]
    Rigid,
}

impl ClaimId {
    pub const ALL: [ClaimId; 8] = [
        ClaimId::T1a,
        ClaimId::T1b,
        ClaimId::T2,
        ClaimId::T4G,
        ClaimId::T4I,
        ClaimId::C1c,
        ClaimId::C1d,
        ClaimId::Rigid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClaimId::T1a => "T1a",
            ClaimId::T1b => "T1b",
            ClaimId::T2 => "T2",
            ClaimId::T4G => "T4G",
            ClaimId::T4I => "T4I",
            ClaimId::C1c => "C1c",
            ClaimId::C1d => "C1d",
            ClaimId::Rigid => "RIGID",
        }
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClaimId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClaimId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownClaim(s.to_string()))
    }
}

/// Tolerances of the checkers, all relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Normalized monotonicity and comparison margins.
    pub margin: f64,
    /// Hölder chain `F^{(p-1)/2} Area^{(3-p)/2} ≥ 1`.
    pub holder: f64,
    /// Algebraic identities such as the reduction of `𝓘` to `𝔐`.
    pub identity: f64,
    /// Constancy of the flat-space rigidity diagnostics.
    pub rigidity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            margin: 1e-8,
            holder: 1e-10,
            identity: 1e-12,
            rigidity: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            margin: self.margin * factor,
            holder: self.holder * factor,
            identity: self.identity * factor,
            rigidity: self.rigidity * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Hypotheses not met: margins are reported, nothing is asserted.
    Recorded,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Recorded => "recorded",
        }
    }
}

/// A margin below tolerance, at one level or a pair of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub levels: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub claim: ClaimId,
    pub p: f64,
    pub metric: String,
    /// Number of levels probed.
    pub levels: usize,
    /// Smallest normalized margin; the claim holds at tolerance when this is `≥ -tolerance`.
    pub worst_margin: f64,
    pub violations: Vec<Violation>,
    pub tolerances: Tolerances,
    pub status: Status,
    /// Levels dropped because a difference stencil left the level range.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trimmed: Vec<f64>,
    /// Extra diagnostics keyed by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MonotonicityReport {
    /// Assemble a report from normalized margins.
    pub fn from_margins(
        claim: ClaimId,
        ctx: &CheckContext,
        levels: usize,
        margins: Vec<(Vec<f64>, f64)>,
        tol: f64,
    ) -> Self {
        let worst_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let violations: Vec<Violation> = margins
            .into_iter()
            .filter(|(_, m)| *m < -tol || m.is_nan())
            .map(|(levels, margin)| Violation { levels, margin })
            .collect();
        let status = match (&ctx.hypothesis, violations.is_empty()) {
            (Hypothesis::OutOfHypothesis(_), _) => Status::Recorded,
            (Hypothesis::Satisfied, true) => Status::Pass,
            (Hypothesis::Satisfied, false) => Status::Fail,
        };
        let note = match &ctx.hypothesis {
            Hypothesis::OutOfHypothesis(why) => Some(format!("out-of-hypothesis: recorded only ({why})")),
            Hypothesis::Satisfied => None,
        };
        Self {
            claim,
            p: ctx.p.value(),
            metric: ctx.metric.clone(),
            levels,
            worst_margin,
            violations,
            tolerances: ctx.tolerances,
            status,
            trimmed: Vec::new(),
            details: BTreeMap::new(),
            note,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub(crate) fn fail_consistency(&mut self, what: &str) {
        if self.status == Status::Pass {
            self.status = Status::Fail;
        }
        let msg = format!("consistency check failed: {what}");
        self.note = Some(match self.note.take() {
            Some(n) => format!("{n}; {msg}"),
            None => msg,
        });
    }
}

/// Whether the theorem hypotheses hold for the metric under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hypothesis {
    Satisfied,
    OutOfHypothesis(String),
}

/// Everything a checker needs besides the level data.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub metric: String,
    pub p: PParam,
    pub hypothesis: Hypothesis,
    pub tolerances: Tolerances,
    /// Curvature bounds of the metric; required by the corollary checks.
    pub certification: Option<Certification>,
    pub lambda_beta: LambdaBeta,
    /// Whether the metric is exactly Euclidean.
    pub flat: bool,
}

impl CheckContext {
    /// Certify the profile's metric on its own grid and decide the hypotheses.
    pub fn for_profile(profile: &GreenProfile, tolerances: Tolerances) -> Result<Self> {
        let metric = profile.metric();
        let cert = certify(metric, profile.radii())?;
        let hypothesis = if cert.nonnegative_scalar() {
            Hypothesis::Satisfied
        } else {
            Hypothesis::OutOfHypothesis(format!("scalar curvature negative, min R = {:e}", cert.min_scalar))
        };
        Ok(Self {
            metric: metric.family().to_string(),
            p: profile.p(),
            hypothesis,
            tolerances,
            certification: Some(cert),
            lambda_beta: LambdaBeta::default_pair(profile.p().value()),
            flat: metric.is_flat(),
        })
    }

    /// Context for data with no metric behind it; hypotheses are taken as given.
    pub fn synthetic(label: &str, p: PParam, tolerances: Tolerances) -> Self {
        Self {
            metric: label.to_string(),
            p,
            hypothesis: Hypothesis::Satisfied,
            tolerances,
            certification: None,
            lambda_beta: LambdaBeta::default_pair(p.value()),
            flat: false,
        }
    }

    pub fn with_lambda_beta(mut self, lb: LambdaBeta) -> Self {
        self.lambda_beta = lb;
        self
    }

    pub fn in_hypothesis(&self) -> bool {
        self.hypothesis == Hypothesis::Satisfied
    }
}

/// Checks one claim on a Green profile.
pub trait ClaimChecker: Send + Sync {
    fn claim(&self) -> ClaimId;
    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport>;
}

struct TheoremA;
struct TheoremB(ClaimId);
struct Generalized(ClaimId);
struct CorollaryC;
struct CorollaryD;
struct Rigidity;

impl ClaimChecker for TheoremA {
    fn claim(&self) -> ClaimId {
        ClaimId::T1a
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        check_theorem_a(profile, levels, ctx)
    }
}

impl ClaimChecker for TheoremB {
    fn claim(&self) -> ClaimId {
        self.0
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        let mut report = check_theorem_b(profile, levels, ctx)?;
        report.claim = self.0;
        Ok(report)
    }
}

impl ClaimChecker for Generalized {
    fn claim(&self) -> ClaimId {
        self.0
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        let (g, i) = check_generalized(profile, ctx.lambda_beta, levels, ctx)?;
        Ok(if self.0 == ClaimId::T4G { g } else { i })
    }
}

impl ClaimChecker for CorollaryC {
    fn claim(&self) -> ClaimId {
        ClaimId::C1c
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        check_corollary_c(profile, levels, ctx)
    }
}

impl ClaimChecker for CorollaryD {
    fn claim(&self) -> ClaimId {
        ClaimId::C1d
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        check_corollary_d(profile, levels, ctx)
    }
}

impl ClaimChecker for Rigidity {
    fn claim(&self) -> ClaimId {
        ClaimId::Rigid
    }

    fn check(&self, profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
        Ok(rigidity_diagnostics(profile, levels, ctx)?.report)
    }
}

/// Claim-keyed collection of checkers.
pub struct ClaimRegistry {
    checkers: BTreeMap<ClaimId, Box<dyn ClaimChecker>>,
}

impl ClaimRegistry {
    pub fn empty() -> Self {
        Self {
            checkers: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(TheoremA));
        reg.register(Box::new(TheoremB(ClaimId::T1b)));
        reg.register(Box::new(TheoremB(ClaimId::T2)));
        reg.register(Box::new(Generalized(ClaimId::T4G)));
        reg.register(Box::new(Generalized(ClaimId::T4I)));
        reg.register(Box::new(CorollaryC));
        reg.register(Box::new(CorollaryD));
        reg.register(Box::new(Rigidity));
        reg
    }

    pub fn builtin() -> &'static ClaimRegistry {
        static REGISTRY: OnceLock<ClaimRegistry> = OnceLock::new();
        REGISTRY.get_or_init(ClaimRegistry::with_builtins)
    }

    pub fn register(&mut self, checker: Box<dyn ClaimChecker>) {
        self.checkers.insert(checker.claim(), checker);
    }

    pub fn get(&self, claim: ClaimId) -> Result<&dyn ClaimChecker> {
        self.checkers
            .get(&claim)
            .map(|c| c.as_ref())
            .ok_or_else(|| Error::UnknownClaim(claim.to_string()))
    }

    pub fn check(
        &self,
        claim: ClaimId,
        profile: &GreenProfile,
        levels: &[f64],
        ctx: &CheckContext,
    ) -> Result<MonotonicityReport> {
        self.get(claim)?.check(profile, levels, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_examples() {
        let (m, p) = lambda_for_beta(2.0, 2.0).unwrap();
        assert_relative_eq!(m.lambda, 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.lambda, 4.0, max_relative = 1e-15);
        assert!(m.admissible && p.admissible);

        let (m, _) = lambda_for_beta(1.5, 4.0 / 3.0).unwrap();
        assert_relative_eq!(m.lambda, 2.0, max_relative = 1e-12);
        assert!(m.exact_constraint_residual.abs() <= 1e-12);

        let beta = 1.0 + 1e-9;
        let (m, p) = lambda_for_beta(2.0, beta).unwrap();
        assert!(m.lambda.is_finite() && p.lambda.is_finite());
        let disc = ((beta + 1.0) * (beta + 1.0) - 4.0 * beta * (beta + 1.0) / 3.0).sqrt();
        assert_relative_eq!(p.lambda, beta + 1.0 + disc, max_relative = 1e-14);
        assert_relative_eq!(m.lambda, beta + 1.0 - disc, max_relative = 1e-12);
    }

    #[test]
    fn negative_discriminant() {
        // (β+1)² < 4β(β+1)(3-p)/(5-p) once β is large at p = 1.2.
        assert!(lambda_for_beta(1.2, 50.0).is_err());
    }

    #[test]
    fn default_pair_reduces_to_flat_coefficient() {
        for p in [1.2, 1.5, 2.0] {
            let lb = LambdaBeta::default_pair(p);
            assert!(lb.admissible);
            assert!(lb.is_default_pair());
            assert_relative_eq!(lb.exponent(), -1.0, max_relative = 1e-14);
            let flat = PParam::new(p, false).unwrap().flat_coefficient();
            assert_relative_eq!(lb.i_coefficient(), flat, max_relative = 1e-14);
        }
    }

    #[test]
    fn claim_names_round_trip() {
        for c in ClaimId::ALL {
            assert_eq!(c.as_str().parse::<ClaimId>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
        assert!("T9".parse::<ClaimId>().is_err());
    }
}
