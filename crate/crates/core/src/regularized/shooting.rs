use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::geometry::flux_integrand;
use crate::numerics::lin_space;
use crate::numerics::quadrature::{integrate, Tolerance};
use crate::numerics::roots::safeguarded_newton;

use super::{AnnulusProblem, Discretization, RegularizedProfile, RegularizedSolver};

const QUAD: Tolerance = Tolerance::new(0.0, 1e-14);

/// Solves the first integral `A φ_ε(s) s = c` pointwise and picks `c` so
/// that `∫_{r_a}^{r_b} s = u_a - u_b`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShootingSolver;

impl RegularizedSolver for ShootingSolver {
    fn name(&self) -> &'static str {
        "shooting"
    }

    fn solve(&self, problem: &AnnulusProblem, resolution: usize) -> Result<RegularizedProfile> {
        shoot(problem, resolution)
    }
}

pub fn solve_regularized_shooting(problem: &AnnulusProblem, nodes: usize) -> Result<RegularizedProfile> {
    shoot(problem, nodes)
}

/// `(∫ s dr, ∫ ∂s/∂c dr)` for flux constant `c`.
fn gap_integrals(problem: &AnnulusProblem, c: f64) -> Result<(f64, f64)> {
    let pv = problem.p.value();
    let eps = problem.eps;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let slope = |r: f64| match problem.slope_for_flux(c, r) {
        Ok(s) => s,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let total = integrate(slope, problem.r_a, problem.r_b, QUAD);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let total = total?.value;
    // ∂s/∂c = 1 / (A g'(s)), g'(s) = (s² + ε)^{(p-4)/2} ((p-1) s² + ε).
    let sensitivity = integrate(
        |r| {
            let s = slope(r);
            let s2 = s * s;
            let dg = (s2 + eps).powf(0.5 * (pv - 4.0)) * ((pv - 1.0) * s2 + eps);
            1.0 / (problem.metric.area(r) * dg)
        },
        problem.r_a,
        problem.r_b,
        QUAD,
    );
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    Ok((total, sensitivity?.value))
}

fn solve_flux_constant(problem: &AnnulusProblem) -> Result<f64> {
    let gap = problem.gap();
    let pv = problem.p.value();
    // ε = 0 gives s = (c/A)^{1/(p-1)} and a closed-form c.
    let reach = integrate(
        |r| flux_integrand(&problem.metric, &problem.p, r),
        problem.r_a,
        problem.r_b,
        QUAD,
    )?
    .value;
    let c0 = (gap / reach).powf(pv - 1.0);

    let residual = |c: f64| -> Result<f64> { Ok(gap_integrals(problem, c)?.0 - gap) };
    let (mut lo, mut hi) = (c0, c0);
    let mut tries = 0;
    while residual(lo)? > 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 400 {
            return Err(Error::RootFinding(format!("boundary gap {gap} unreachable from below")));
        }
    }
    while residual(hi)? < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 400 {
            return Err(Error::RootFinding(format!("boundary gap {gap} unreachable from above")));
        }
    }
    if lo == hi {
        return Ok(lo);
    }

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let x = safeguarded_newton(
        |x| {
            let c = x.exp();
            match gap_integrals(problem, c) {
                Ok((total, sens)) => (total - gap, sens * c),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    (f64::NAN, f64::NAN)
                }
            }
        },
        lo.ln(),
        hi.ln(),
        1e-15,
        200,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(x?.exp())
}

fn shoot(problem: &AnnulusProblem, nodes: usize) -> Result<RegularizedProfile> {
    if nodes < 2 {
        return Err(Error::InvalidArgument(format!("shooting needs at least 2 nodes, got {nodes}")));
    }
    let r = lin_space(problem.r_a, problem.r_b, nodes);
    let c = if problem.gap() == 0.0 { 0.0 } else { solve_flux_constant(problem)? };

    let mut s = Vec::with_capacity(nodes);
    for &ri in &r {
        s.push(problem.slope_for_flux(c, ri)?);
    }
    let mut ue = vec![problem.u_a; nodes];
    for i in 1..nodes {
        let step = integrate(
            |x| problem.slope_for_flux(c, x).unwrap_or(f64::NAN),
            r[i - 1],
            r[i],
            QUAD,
        )?;
        ue[i] = ue[i - 1] - step.value;
    }
    Ok(RegularizedProfile {
        problem: problem.clone(),
        solver: "shooting",
        discretization: Discretization::Continuous,
        due: s.iter().map(|&x| -x).collect(),
        slope_r: r.clone(),
        r,
        ue,
        c_flux: c,
        energy: None,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PParam, WarpedMetric};
    use crate::green::{solve_green, GridSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat_problem(p: f64, eps: f64) -> AnnulusProblem {
        let g = solve_green(&WarpedMetric::euclidean(), PParam::new(p, false).unwrap(), GridSpec::default()).unwrap();
        AnnulusProblem::from_green(&g, eps, 0.5, 2.0).unwrap()
    }

    #[test]
    fn recovers_unit_flux_at_eps_zero() {
        let prof = solve_regularized_shooting(&flat_problem(1.5, 0.0), 65).unwrap();
        assert_relative_eq!(prof.c_flux(), 1.0, max_relative = 1e-10);
        assert!(prof.boundary_residual() <= 1e-12 * prof.problem().u_a);
        // s = (c / (4π r²))²
        let r = 1.3;
        assert_relative_eq!(prof.slope(r).unwrap(), (1.0 / (4.0 * PI * r * r)).powi(2), max_relative = 1e-12);
    }

    #[test]
    fn p2_is_eps_independent() {
        let a = solve_regularized_shooting(&flat_problem(2.0, 0.0), 33).unwrap();
        let b = solve_regularized_shooting(&flat_problem(2.0, 0.5), 33).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, max_relative = 1e-13);
        }
        assert_relative_eq!(a.value_at(1.0).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-12);
    }

    #[test]
    fn first_integral_is_conserved() {
        let prof = solve_regularized_shooting(&flat_problem(1.5, 1e-3), 129).unwrap();
        assert!(prof.max_flux_residual() < 1e-12);
        assert!(prof.boundary_residual() <= 1e-12 * prof.problem().u_a);
        assert!(prof.values().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn equal_boundary_values_give_constant() {
        let m = WarpedMetric::euclidean();
        let prob = AnnulusProblem::new(&m, PParam::new(1.5, false).unwrap(), 1e-2, 1.0, 2.0, 0.3, 0.3).unwrap();
        let prof = solve_regularized_shooting(&prob, 9).unwrap();
        assert_eq!(prof.c_flux(), 0.0);
        assert!(prof.values().iter().all(|&v| v == 0.3));
    }
}
