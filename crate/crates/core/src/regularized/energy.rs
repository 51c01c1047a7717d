use crate::error::{Error, Result};
use crate::numerics::lin_space;
use crate::numerics::quadrature::gk15;
use crate::numerics::tridiag::solve_tridiagonal;

use super::{AnnulusProblem, Discretization, RegularizedProfile, RegularizedSolver};

const MAX_NEWTON: usize = 200;
const MAX_HALVINGS: usize = 60;
const ARMIJO: f64 = 1e-4;
/// Gradient tolerance relative to the cell-flux scale.
const GRAD_TOL: f64 = 1e-13;
/// Looser tolerance accepted once roundoff stops the line search.
const GRAD_TOL_FLOOR: f64 = 1e-10;

/// Damped Newton on the piecewise-linear discretization of
/// `I_ε(u) = ∫ (u'² + ε)^{p/2} dV`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergySolver;

impl RegularizedSolver for EnergySolver {
    fn name(&self) -> &'static str {
        "energy"
    }

    fn solve(&self, problem: &AnnulusProblem, resolution: usize) -> Result<RegularizedProfile> {
        minimize_energy(problem, resolution)
    }
}

struct Integrand {
    p: f64,
    eps: f64,
}

impl Integrand {
    /// `ψ(d) = (d² + ε)^{p/2}`.
    fn value(&self, d: f64) -> f64 {
        (d * d + self.eps).powf(0.5 * self.p)
    }

    fn first(&self, d: f64) -> f64 {
        self.p * d * (d * d + self.eps).powf(0.5 * (self.p - 2.0))
    }

    /// `p (d² + ε)^{(p-4)/2} ((p-1) d² + ε)`, positive off `d = ε = 0`.
    fn second(&self, d: f64) -> f64 {
        let d2 = d * d;
        self.p * (d2 + self.eps).powf(0.5 * (self.p - 4.0)) * ((self.p - 1.0) * d2 + self.eps)
    }
}

fn slopes(u: &[f64], h: &[f64]) -> Vec<f64> {
    u.windows(2).zip(h).map(|(w, &hk)| (w[1] - w[0]) / hk).collect()
}

fn energy(psi: &Integrand, weights: &[f64], d: &[f64]) -> f64 {
    weights.iter().zip(d).map(|(&wk, &dk)| wk * psi.value(dk)).sum()
}

fn dump(u: &[f64]) -> String {
    let shown: Vec<String> = u.iter().take(8).map(|x| format!("{x:e}")).collect();
    format!("[{}{}]", shown.join(", "), if u.len() > 8 { ", ..." } else { "" })
}

/// Minimize the discrete energy with `n_cells` uniform cells.
///
/// Cell weights `∫_cell A dr` are integrated exactly, so the discrete energy
/// is the true energy of the piecewise-linear trial function.
pub fn minimize_energy(problem: &AnnulusProblem, n_cells: usize) -> Result<RegularizedProfile> {
    if n_cells < 16 {
        return Err(Error::InvalidArgument(format!("energy minimization needs at least 16 cells, got {n_cells}")));
    }
    let pv = problem.p.value();
    let eps = problem.eps;
    let psi = Integrand { p: pv, eps };
    let r = lin_space(problem.r_a, problem.r_b, n_cells + 1);
    let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
    let area = |x: f64| problem.metric.area(x);
    let weights: Vec<f64> = r.windows(2).map(|w| gk15(&area, w[0], w[1]).0).collect();
    let abar: Vec<f64> = weights.iter().zip(&h).map(|(&wk, &hk)| wk / hk).collect();
    let mid: Vec<f64> = r.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let gap = problem.gap();
    if gap == 0.0 {
        let u = vec![problem.u_a; n_cells + 1];
        let d = vec![0.0; n_cells];
        return Ok(RegularizedProfile {
            problem: problem.clone(),
            solver: "energy",
            discretization: Discretization::PiecewiseLinear,
            r,
            ue: u,
            slope_r: mid,
            due: d.clone(),
            c_flux: 0.0,
            energy: Some(energy(&psi, &weights, &d)),
            iterations: 0,
        });
    }

    // Exact discrete minimizer for ε = 0: Ā_k |d_k|^{p-1} constant.
    let raw: Vec<f64> = abar.iter().map(|&a| a.powf(-1.0 / (pv - 1.0))).collect();
    let total: f64 = raw.iter().zip(&h).map(|(&s, &hk)| s * hk).sum();
    let mut u = vec![problem.u_a; n_cells + 1];
    for k in 0..n_cells {
        u[k + 1] = u[k] - gap * raw[k] / total * h[k];
    }
    u[n_cells] = problem.u_b;

    let mut iterations = 0;
    loop {
        let d = slopes(&u, &h);
        if eps == 0.0 && pv < 2.0 && d.iter().any(|&x| x == 0.0) {
            return Err(Error::InvalidArgument(
                "zero slope reached with ε = 0 and p < 2; the energy is not twice differentiable there".into(),
            ));
        }
        let flux: Vec<f64> = d.iter().zip(&abar).map(|(&dk, &ak)| ak * psi.first(dk)).collect();
        let scale = flux.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        let grad: Vec<f64> = flux.windows(2).map(|f| f[0] - f[1]).collect();
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= GRAD_TOL * scale {
            break;
        }
        if iterations >= MAX_NEWTON {
            return Err(Error::LineSearch {
                iteration: iterations,
                detail: format!("no convergence; gradient {grad_norm:e} vs scale {scale:e}, iterate {}", dump(&u)),
            });
        }
        iterations += 1;

        let curv: Vec<f64> = d.iter().zip(&abar).zip(&h).map(|((&dk, &ak), &hk)| ak * psi.second(dk) / hk).collect();
        let m = n_cells - 1;
        let diag: Vec<f64> = (0..m).map(|j| curv[j] + curv[j + 1]).collect();
        let off: Vec<f64> = (0..m - 1).map(|j| -curv[j + 1]).collect();
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve_tridiagonal(&off, &diag, &off, &rhs)?;
        let slope_along: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();

        let e0 = energy(&psi, &weights, &d);
        let slack = 8.0 * f64::EPSILON * e0.abs();
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = u.clone();
        for _ in 0..MAX_HALVINGS {
            for j in 0..m {
                trial[j + 1] = u[j + 1] + alpha * step[j];
            }
            let e1 = energy(&psi, &weights, &slopes(&trial, &h));
            if e1 <= e0 + ARMIJO * alpha * slope_along + slack {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if grad_norm <= GRAD_TOL_FLOOR * scale {
                break;
            }
            return Err(Error::LineSearch {
                iteration: iterations,
                detail: format!(
                    "energy {e0:e}, gradient {grad_norm:e} vs scale {scale:e}, iterate {}",
                    dump(&u)
                ),
            });
        }
        let moved = step.iter().fold(0.0f64, |m, s| m.max((alpha * s).abs()));
        u = trial;
        if moved <= 4.0 * f64::EPSILON * problem.u_a.abs().max(problem.u_b.abs()) && grad_norm <= GRAD_TOL_FLOOR * scale {
            break;
        }
    }

    let d = slopes(&u, &h);
    let fluxes: Vec<f64> = d
        .iter()
        .zip(&abar)
        .map(|(&dk, &ak)| ak * dk.abs() * (dk * dk + eps).powf(0.5 * (pv - 2.0)))
        .collect();
    let c_flux = fluxes.iter().sum::<f64>() / fluxes.len() as f64;
    Ok(RegularizedProfile {
        problem: problem.clone(),
        solver: "energy",
        discretization: Discretization::PiecewiseLinear,
        r,
        ue: u,
        slope_r: mid,
        energy: Some(energy(&psi, &weights, &d)),
        due: d,
        c_flux,
        iterations,
    })
}

impl RegularizedProfile {
    /// Relative spread of `Ā_k φ_ε(s_k) s_k` over the cells, with `Ā_k` the
    /// cell-averaged area; this is the discrete first integral.
    pub fn discrete_flux_spread(&self) -> Option<f64> {
        if self.discretization != Discretization::PiecewiseLinear || self.c_flux == 0.0 {
            return None;
        }
        let pv = self.problem.p.value();
        let eps = self.problem.eps;
        let area = |x: f64| self.problem.metric.area(x);
        let spread = self
            .r
            .windows(2)
            .zip(&self.due)
            .map(|(w, &dk)| {
                let abar = gk15(&area, w[0], w[1]).0 / (w[1] - w[0]);
                let flux = abar * dk.abs() * (dk * dk + eps).powf(0.5 * (pv - 2.0));
                (flux / self.c_flux - 1.0).abs()
            })
            .fold(0.0, f64::max);
        Some(spread)
    }
}
