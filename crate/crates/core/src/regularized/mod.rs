//! The regularized equation `div((|∇u|² + ε)^{(p-2)/2} ∇u) = 0` on annuli.
//!
//! Radially the equation integrates once: `A(r) φ_ε(s) s = c` with
//! `s = |u'|` and a constant flux `c`. The shooting solver works directly
//! with that first integral; the energy solver minimizes the discretized
//! energy `∫ (|u'|² + ε)^{p/2} dV` over piecewise-linear profiles and never
//! sees it. Agreement between the two is the main correctness check.

mod energy;
mod kato;
mod shooting;
mod study;

use std::io::{self, Write};
use std::sync::OnceLock;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{PParam, WarpedMetric};
use crate::green::GreenProfile;
use crate::numerics::quadrature::{integrate, Tolerance};
use crate::numerics::roots::safeguarded_newton;
use crate::table::fmt_float;

pub use energy::{minimize_energy, EnergySolver};
pub use kato::{error_term_e, h_eps, h_eps_terms, kato_check, level_derivative, KatoSample, RadialField};
pub use shooting::{solve_regularized_shooting, ShootingSolver};
pub use study::{
    almost_monotonicity_study, convergence_study, cross_validate, AlmostMonotonicityRow, AlmostMonotonicityTable,
    ConvergenceRow, ConvergenceTable, CrossValidation,
};

fn check_args(s: f64, eps: f64, p: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("gradient modulus must be finite and >= 0, got {s}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε must be finite and >= 0, got {eps}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent {
            p,
            reason: "p must exceed 1",
        });
    }
    Ok(())
}

/// `φ_ε(s) = (s² + ε)^{(p-2)/2}`.
pub fn phi_eps(s: f64, eps: f64, p: f64) -> Result<f64> {
    check_args(s, eps, p)?;
    if s == 0.0 && eps == 0.0 && p < 2.0 {
        return Err(Error::InvalidArgument("φ_0(0) is singular for p < 2".into()));
    }
    Ok((s * s + eps).powf(0.5 * (p - 2.0)))
}

/// `η_ε(s) = s (log φ_ε)'(s) = (p-2) s² / (s² + ε)`.
pub fn eta_eps(s: f64, eps: f64, p: f64) -> Result<f64> {
    check_args(s, eps, p)?;
    if s == 0.0 && eps == 0.0 {
        return Err(Error::InvalidArgument("η is undefined at s = ε = 0".into()));
    }
    let s2 = s * s;
    Ok((p - 2.0) * s2 / (s2 + eps))
}

/// `η_ε'(s) = 2(p-2) ε s / (s² + ε)²`.
pub fn eta_eps_prime(s: f64, eps: f64, p: f64) -> Result<f64> {
    check_args(s, eps, p)?;
    if s == 0.0 && eps == 0.0 {
        return Err(Error::InvalidArgument("η' is undefined at s = ε = 0".into()));
    }
    let d = s * s + eps;
    Ok(2.0 * (p - 2.0) * eps * s / (d * d))
}

/// `(p - 2 - η_ε) / η_ε = ε / s²`, the removable 0/0 in the error term.
pub(crate) fn eta_defect_ratio(s: f64, eps: f64) -> f64 {
    eps / (s * s)
}

/// Solve `s φ_ε(s) = q` for `s ≥ 0`.
///
/// Newton runs in `x = ln s`, where the equation reads
/// `x + (p-2)/2 · ln(e^{2x} + ε) = ln q` and has slope `1 + η ∈ [min(1,p-1), max(1,p-1)]`,
/// so a bracket follows from any starting guess.
pub fn gradient_from_flux(q: f64, eps: f64, p: f64) -> Result<f64> {
    check_args(q, eps, p)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let ln_q = q.ln();
    let half = 0.5 * (p - 2.0);
    let ln_eps = eps.ln();
    // ln(s² + ε) and s²/(s² + ε), both without overflow.
    let residual = |x: f64| -> (f64, f64) {
        let a = 2.0 * x;
        let (ln_d, frac) = if eps == 0.0 {
            (a, 1.0)
        } else {
            let hi = a.max(ln_eps);
            (hi + (-(a - ln_eps).abs()).exp().ln_1p(), 1.0 / (1.0 + (ln_eps - a).exp()))
        };
        (x + half * ln_d - ln_q, 1.0 + (p - 2.0) * frac)
    };
    // ε = 0 root as the starting guess.
    let x0 = ln_q / (p - 1.0);
    let (g0, _) = residual(x0);
    if g0 == 0.0 {
        return Ok(x0.exp());
    }
    let min_slope = (p - 1.0).min(1.0);
    let reach = g0.abs() / min_slope * (1.0 + 1e-12) + 1e-12;
    let (lo, hi) = if g0 > 0.0 { (x0 - reach, x0) } else { (x0, x0 + reach) };
    let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    Ok(safeguarded_newton(residual, lo, hi, tol, 200)?.exp())
}

/// `s'/s = -(A'/A) (s² + ε) / ((p-1) s² + ε)`, obtained by differentiating
/// the first integral `A φ_ε(s) s = c`.
pub(crate) fn first_integral_slope_derivative(metric: &WarpedMetric, p: f64, eps: f64, r: f64, s: f64) -> f64 {
    let dlog_area = 2.0 * metric.dw(r) / metric.w(r);
    let s2 = s * s;
    -dlog_area * s * (s2 + eps) / ((p - 1.0) * s2 + eps)
}

/// Dirichlet problem on `[r_a, r_b]` with `u(r_a) = u_a ≥ u(r_b) = u_b`.
#[derive(Debug, Clone)]
pub struct AnnulusProblem {
    pub metric: WarpedMetric,
    pub p: PParam,
    pub eps: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub u_a: f64,
    pub u_b: f64,
}

impl AnnulusProblem {
    pub fn new(metric: &WarpedMetric, p: PParam, eps: f64, r_a: f64, r_b: f64, u_a: f64, u_b: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("ε must be finite and >= 0, got {eps}")));
        }
        if !(r_a > 0.0 && r_b > r_a) {
            return Err(Error::InvalidArgument(format!("annulus needs 0 < r_a < r_b, got [{r_a}, {r_b}]")));
        }
        metric.check_domain(r_a)?;
        metric.check_domain(r_b)?;
        if !(u_a.is_finite() && u_b.is_finite() && u_a >= u_b) {
            return Err(Error::InvalidArgument(format!(
                "boundary data must decrease outward, got u(r_a) = {u_a}, u(r_b) = {u_b}"
            )));
        }
        Ok(Self {
            metric: metric.clone(),
            p,
            eps,
            r_a,
            r_b,
            u_a,
            u_b,
        })
    }

    /// Boundary values taken from a Green profile, so `ε = 0` recovers it.
    pub fn from_green(green: &GreenProfile, eps: f64, r_a: f64, r_b: f64) -> Result<Self> {
        Self::new(
            green.metric(),
            green.p(),
            eps,
            r_a,
            r_b,
            green.value_at(r_a)?,
            green.value_at(r_b)?,
        )
    }

    pub fn gap(&self) -> f64 {
        self.u_a - self.u_b
    }

    /// `|u'(r)|` for flux constant `c`.
    pub fn slope_for_flux(&self, c: f64, r: f64) -> Result<f64> {
        gradient_from_flux(c / self.metric.area(r), self.eps, self.p.value())
    }

    /// `∫ A dr` over the annulus.
    pub fn volume(&self) -> Result<f64> {
        Ok(integrate(|r| self.metric.area(r), self.r_a, self.r_b, Tolerance::new(0.0, 1e-14))?.value)
    }
}

/// How values between grid nodes are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Values are integrals of the first-integral gradient; exact off-grid.
    Continuous,
    /// Piecewise-linear finite-element profile.
    PiecewiseLinear,
}

/// Solution of an [`AnnulusProblem`].
#[derive(Debug, Clone)]
pub struct RegularizedProfile {
    pub(crate) problem: AnnulusProblem,
    pub(crate) solver: &'static str,
    pub(crate) discretization: Discretization,
    pub(crate) r: Vec<f64>,
    pub(crate) ue: Vec<f64>,
    /// Radii where `due` is sampled: nodes for shooting, cell midpoints for
    /// the finite-element solution.
    pub(crate) slope_r: Vec<f64>,
    pub(crate) due: Vec<f64>,
    pub(crate) c_flux: f64,
    pub(crate) energy: Option<f64>,
    pub(crate) iterations: usize,
}

impl RegularizedProfile {
    pub fn problem(&self) -> &AnnulusProblem {
        &self.problem
    }

    pub fn solver(&self) -> &'static str {
        self.solver
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn eps(&self) -> f64 {
        self.problem.eps
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.ue
    }

    pub fn slope_radii(&self) -> &[f64] {
        &self.slope_r
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.due
    }

    /// The conserved flux `A φ_ε(|u'|) |u'|`.
    pub fn c_flux(&self) -> f64 {
        self.c_flux
    }

    /// Discrete energy of the finite-element solution.
    pub fn energy(&self) -> Option<f64> {
        self.energy
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `A φ_ε(s) s / c - 1` at each slope sample.
    pub fn flux_residuals(&self) -> Vec<f64> {
        let pv = self.problem.p.value();
        self.slope_r
            .iter()
            .zip(&self.due)
            .map(|(&r, &d)| {
                let s = d.abs();
                let flux = self.problem.metric.area(r) * s * (s * s + self.problem.eps).powf(0.5 * (pv - 2.0));
                if self.c_flux == 0.0 {
                    flux
                } else {
                    flux / self.c_flux - 1.0
                }
            })
            .collect()
    }

    pub fn max_flux_residual(&self) -> f64 {
        self.flux_residuals().into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    /// Largest boundary mismatch of the stored nodes.
    pub fn boundary_residual(&self) -> f64 {
        let first = (self.ue[0] - self.problem.u_a).abs();
        let last = (self.ue[self.ue.len() - 1] - self.problem.u_b).abs();
        first.max(last)
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= self.problem.r_a && r <= self.problem.r_b) {
            return Err(Error::OutOfDomain { r, r_max: self.problem.r_b });
        }
        Ok(())
    }

    fn segment(&self, r: f64) -> usize {
        self.r.partition_point(|&x| x <= r).saturating_sub(1).min(self.r.len() - 2)
    }

    /// `u_ε(r)` on the annulus.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let i = self.segment(r);
        match self.discretization {
            Discretization::PiecewiseLinear => {
                let (r0, r1) = (self.r[i], self.r[i + 1]);
                let w = (r - r0) / (r1 - r0);
                Ok(self.ue[i] * (1.0 - w) + self.ue[i + 1] * w)
            }
            Discretization::Continuous => {
                let q = integrate(
                    |x| self.slope(x).unwrap_or(f64::NAN),
                    r,
                    self.r[i + 1],
                    Tolerance::new(0.0, 1e-14),
                )?;
                Ok(self.ue[i + 1] + q.value)
            }
        }
    }

    /// `|u_ε'(r)|` from the first integral with this profile's flux constant.
    pub fn slope(&self, r: f64) -> Result<f64> {
        self.problem.slope_for_flux(self.c_flux, r)
    }

    /// Radius where `u_ε = t`.
    pub fn invert_level(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.level_range();
        if !(t >= lo && t <= hi) {
            return Err(Error::LevelOutOfRange { t, lo, hi });
        }
        if lo == hi {
            return Ok(self.problem.r_a);
        }
        let i = self.ue.partition_point(|&v| v >= t).saturating_sub(1).min(self.r.len() - 2);
        if self.ue[i] == t {
            return Ok(self.r[i]);
        }
        if self.ue[i + 1] == t {
            return Ok(self.r[i + 1]);
        }
        if self.discretization == Discretization::PiecewiseLinear {
            let w = (self.ue[i] - t) / (self.ue[i] - self.ue[i + 1]);
            return Ok(self.r[i] + w * (self.r[i + 1] - self.r[i]));
        }
        let tol = 4.0 * f64::EPSILON * self.r[i + 1];
        safeguarded_newton(
            |r| (t - self.value_at(r).unwrap_or(f64::NAN), self.slope(r).unwrap_or(f64::NAN)),
            self.r[i],
            self.r[i + 1],
            tol,
            200,
        )
    }

    /// `(u_ε(r_b), u_ε(r_a))`.
    pub fn level_range(&self) -> (f64, f64) {
        (self.ue[self.ue.len() - 1], self.ue[0])
    }

    /// `F_ε(t) = A u_ε'²` and `flux_ε = A φ_ε(|u_ε'|) |u_ε'|` on `{u_ε = t}`.
    pub fn level_quantities(&self, t: f64) -> Result<RegularizedLevel> {
        let r_t = self.invert_level(t)?;
        let s = self.slope(r_t)?;
        let area = self.problem.metric.area(r_t);
        let pv = self.problem.p.value();
        Ok(RegularizedLevel {
            t,
            r_t,
            f_eps: area * s * s,
            flux_eps: area * s * (s * s + self.problem.eps).powf(0.5 * (pv - 2.0)),
        })
    }

    /// CSV with columns `r,ue,due,c_flux_residual,eta,kato_margin_full,kato_margin_nu`
    /// at every slope sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,ue,due,c_flux_residual,eta,kato_margin_full,kato_margin_nu")?;
        let residuals = self.flux_residuals();
        let samples = kato_check(self, &self.slope_r).map_err(io::Error::other)?;
        for (k, (&r, &due)) in self.slope_r.iter().zip(&self.due).enumerate() {
            let ue = self.value_at(r).map_err(io::Error::other)?;
            let kato = &samples[k];
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_float(r),
                fmt_float(ue),
                fmt_float(due),
                fmt_float(residuals[k]),
                fmt_float(kato.eta),
                fmt_float(kato.margin_full),
                fmt_float(kato.margin_nu)
            )?;
        }
        Ok(())
    }
}

/// Level quantities of a regularized profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedLevel {
    pub t: f64,
    pub r_t: f64,
    pub f_eps: f64,
    pub flux_eps: f64,
}

/// A method for solving [`AnnulusProblem`]s.
pub trait RegularizedSolver: Send + Sync {
    fn name(&self) -> &'static str;
    /// `resolution` is the node count for shooting and the cell count for
    /// the finite-element solver.
    fn solve(&self, problem: &AnnulusProblem, resolution: usize) -> Result<RegularizedProfile>;
}

/// Name-keyed collection of regularized solvers.
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn RegularizedSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            solvers: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(ShootingSolver));
        reg.register(Box::new(EnergySolver));
        reg
    }

    pub fn builtin() -> &'static SolverRegistry {
        static REGISTRY: OnceLock<SolverRegistry> = OnceLock::new();
        REGISTRY.get_or_init(SolverRegistry::with_builtins)
    }

    pub fn register(&mut self, solver: Box<dyn RegularizedSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn RegularizedSolver> {
        self.solvers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))
    }
}
