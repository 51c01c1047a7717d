use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PParam, WarpedMetric};
use crate::green::{level_grid, solve_green, GridSpec};
use crate::numerics::lin_space;

use super::{
    error_term_e, h_eps_terms, minimize_energy, solve_regularized_shooting, AnnulusProblem,
    RegularizedProfile,
};

/// Sample count across the annulus for error norms.
const SAMPLES: usize = 257;
/// Levels used to test constancy of the regularized flux.
const FLUX_LEVELS: usize = 16;
/// Interior levels whose pairs probe almost-monotonicity.
const PAIR_LEVELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// `sup |u_ε - û|` over the annulus.
    pub c0_error: f64,
    /// `sup | |u_ε'| - |û'| |` over the annulus.
    pub c1_error: f64,
    pub c_flux: f64,
    /// Largest relative deviation of the level flux from `c_flux`.
    pub flux_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub p: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub rows: Vec<ConvergenceRow>,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl ConvergenceTable {
    pub fn c0_strictly_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.c0_error))
    }

    pub fn c1_strictly_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.c1_error))
    }

    pub fn final_c1_error(&self) -> Option<f64> {
        self.rows.last().map(|r| r.c1_error)
    }

    pub fn max_flux_spread(&self) -> f64 {
        self.rows.iter().map(|r| r.flux_spread).fold(0.0, f64::max)
    }
}

fn flux_spread(profile: &RegularizedProfile) -> Result<f64> {
    let (lo, hi) = profile.level_range();
    let mut worst = 0.0f64;
    for t in lin_space(lo, hi, FLUX_LEVELS + 2).into_iter().skip(1).take(FLUX_LEVELS) {
        let q = profile.level_quantities(t)?;
        worst = worst.max((q.flux_eps / profile.c_flux() - 1.0).abs());
    }
    Ok(worst)
}

/// Errors of the regularized solutions against the Green profile, with
/// boundary data taken from the Green profile.
pub fn convergence_study(
    metric: &WarpedMetric,
    p: PParam,
    eps_schedule: &[f64],
    annulus: (f64, f64),
) -> Result<ConvergenceTable> {
    if eps_schedule.is_empty() || !eps_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("ε schedule must be non-empty and strictly decreasing".into()));
    }
    let green = solve_green(metric, p, GridSpec::default())?;
    let (r_a, r_b) = annulus;
    let radii = lin_space(r_a, r_b, SAMPLES);
    let exact: Vec<f64> = radii.iter().map(|&r| green.value_at(r)).collect::<Result<_>>()?;
    let exact_slope: Vec<f64> = radii.iter().map(|&r| green.gradient_at(r)).collect();

    let mut rows = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let problem = AnnulusProblem::from_green(&green, eps, r_a, r_b)?;
        let prof = solve_regularized_shooting(&problem, SAMPLES)?;
        let mut c0 = 0.0f64;
        let mut c1 = 0.0f64;
        for (k, &r) in radii.iter().enumerate() {
            c0 = c0.max((prof.values()[k] - exact[k]).abs());
            c1 = c1.max((prof.slope(r)? - exact_slope[k]).abs());
        }
        rows.push(ConvergenceRow {
            eps,
            c0_error: c0,
            c1_error: c1,
            c_flux: prof.c_flux(),
            flux_spread: flux_spread(&prof)?,
        });
    }
    Ok(ConvergenceTable {
        p: p.value(),
        r_a,
        r_b,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// `(n_cells, sup-norm gap at the nodes)`.
    pub rows: Vec<(usize, f64)>,
    /// Gap ratio per refinement step.
    pub ratios: Vec<f64>,
    /// Median of `gap · n_cells²`.
    pub constant: f64,
}

/// Compare the finite-element solver with shooting over a list of cell counts.
pub fn cross_validate(problem: &AnnulusProblem, cells: &[usize]) -> Result<CrossValidation> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no cell counts given".into()));
    }
    let reference = solve_regularized_shooting(problem, 65)?;
    let mut rows = Vec::with_capacity(cells.len());
    for &n in cells {
        let fe = minimize_energy(problem, n)?;
        let mut gap = 0.0f64;
        for (&r, &u) in fe.radii().iter().zip(fe.values()) {
            gap = gap.max((u - reference.value_at(r)?).abs());
        }
        rows.push((n, gap));
    }
    let ratios = rows.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let mut scaled: Vec<f64> = rows.iter().map(|&(n, g)| g * (n * n) as f64).collect();
    scaled.sort_by(f64::total_cmp);
    let constant = scaled[scaled.len() / 2];
    for &(n, gap) in &rows {
        let expected = constant / (n * n) as f64;
        if gap > 10.0 * expected {
            return Err(Error::SolverDisagreement(format!(
                "{n} cells: gap {gap:e} exceeds 10x the expected {expected:e}"
            )));
        }
    }
    Ok(CrossValidation { rows, ratios, constant })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmostMonotonicityRow {
    pub eps: f64,
    /// Largest `max(0, 𝓗_ε(t₁) - 𝓗_ε(t₂) - 𝐄)` over level pairs `t₁ < t₂`,
    /// counting values within the tolerance of the term scale as zero.
    pub excess: f64,
    /// Largest `𝓗_ε(t₁) - 𝓗_ε(t₂) - 𝐄` before clipping.
    pub raw_excess: f64,
    /// Largest `|𝐄|` over the pairs.
    pub max_abs_e: f64,
    /// Largest single term of `𝓗_ε` over the levels.
    pub term_scale: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostMonotonicityTable {
    pub p: f64,
    pub beta: f64,
    pub lambda: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub tolerance: f64,
    pub rows: Vec<AlmostMonotonicityRow>,
}

impl AlmostMonotonicityTable {
    /// Least-squares slope of `ln excess` against `ln ε` over rows with a
    /// positive excess; `None` with fewer than two such rows, where the
    /// excess is bounded by `C √ε` with `C = 0`.
    pub fn fitted_exponent(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.excess > 0.0)
            .map(|r| (r.eps.ln(), r.excess.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    /// Median of `excess / √ε`.
    pub fn fitted_constant(&self) -> f64 {
        let mut c: Vec<f64> = self.rows.iter().map(|r| r.excess / r.eps.sqrt()).collect();
        if c.is_empty() {
            return 0.0;
        }
        c.sort_by(f64::total_cmp);
        c[c.len() / 2]
    }

    /// `max |𝐄|` at the smallest ε.
    pub fn final_error_term(&self) -> Option<f64> {
        self.rows.last().map(|r| r.max_abs_e)
    }
}

/// Measure `𝓗_ε(t₁) - 𝓗_ε(t₂) - 𝐄` over pairs of interior levels of the
/// regularized solutions with Green boundary data, for each ε.
///
/// `tolerance` is relative to the largest term of `𝓗_ε` at the two levels,
/// the same normalization the monotonicity checkers use.
pub fn almost_monotonicity_study(
    metric: &WarpedMetric,
    p: PParam,
    eps_schedule: &[f64],
    annulus: (f64, f64),
    (lambda, beta): (f64, f64),
    tolerance: f64,
) -> Result<AlmostMonotonicityTable> {
    if eps_schedule.is_empty() || !eps_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("ε schedule must be non-empty and strictly decreasing".into()));
    }
    let green = solve_green(metric, p, GridSpec::default())?;
    let (r_a, r_b) = annulus;
    let mut rows = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let problem = AnnulusProblem::from_green(&green, eps, r_a, r_b)?;
        let prof = solve_regularized_shooting(&problem, SAMPLES)?;
        let levels = level_grid(prof.level_range(), PAIR_LEVELS, 0.05)?;
        let terms: Vec<[f64; 3]> = levels
            .iter()
            .map(|&t| h_eps_terms(&prof, t, beta, lambda))
            .collect::<Result<_>>()?;
        let h: Vec<f64> = terms.iter().map(|x| x.iter().sum()).collect();
        let size: Vec<f64> = terms.iter().map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
        let mut row = AlmostMonotonicityRow {
            eps,
            excess: 0.0,
            raw_excess: f64::NEG_INFINITY,
            max_abs_e: 0.0,
            term_scale: size.iter().copied().fold(0.0, f64::max),
            pairs: 0,
        };
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                let e = error_term_e(&prof, levels[i], levels[j], beta)?;
                let raw = h[i] - h[j] - e;
                row.raw_excess = row.raw_excess.max(raw);
                row.max_abs_e = row.max_abs_e.max(e.abs());
                if raw > tolerance * size[i].max(size[j]) {
                    row.excess = row.excess.max(raw);
                }
                row.pairs += 1;
            }
        }
        rows.push(row);
    }
    Ok(AlmostMonotonicityTable {
        p: p.value(),
        beta,
        lambda,
        r_a,
        r_b,
        tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_has_no_eps_dependence() {
        let t = convergence_study(&WarpedMetric::euclidean(), PParam::new(2.0, false).unwrap(), &[1e-1, 1e-2], (0.5, 2.0)).unwrap();
        for row in &t.rows {
            assert!(row.c0_error < 1e-14 && row.c1_error < 1e-14, "{row:?}");
        }
    }

    #[test]
    fn schedule_must_decrease() {
        let e = WarpedMetric::euclidean();
        let p = PParam::new(1.5, false).unwrap();
        assert!(convergence_study(&e, p, &[1e-2, 1e-1], (0.5, 2.0)).is_err());
        assert!(convergence_study(&e, p, &[], (0.5, 2.0)).is_err());
    }

    #[test]
    fn error_term_is_linear_in_eps_near_the_pole() {
        let t = almost_monotonicity_study(
            &WarpedMetric::euclidean(),
            PParam::new(1.5, false).unwrap(),
            &[1e-2, 1e-3, 1e-4],
            (0.02, 0.08),
            (2.0, 4.0 / 3.0),
            1e-8,
        )
        .unwrap();
        let e: Vec<f64> = t.rows.iter().map(|r| r.max_abs_e).collect();
        assert!((e[0] / e[1] - 10.0).abs() < 0.1 && (e[1] / e[2] - 10.0).abs() < 0.1, "{e:?}");
        assert_eq!(t.rows[0].pairs, 28);
    }
}
