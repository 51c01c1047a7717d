use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{hessian_radial, RadialJet};
use crate::green::GreenProfile;

use super::{log_derivative, CheckContext, ClaimId, Hypothesis, MonotonicityReport};

/// Equality-case quantities at one level. In flat space every ratio below is
/// constant: the gradient ratio, `-(p-1)/2`, and 1 for the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityLevel {
    pub t: f64,
    pub r_t: f64,
    /// `|∇û| / û^{2/(3-p)}`.
    pub gradient_ratio: f64,
    /// `∇²û(e_i, e_i) / ∇²û(ν, ν)` for a tangent `e_i`.
    pub hessian_ratio: f64,
    /// `A_t / ((3-p) t / 2)` with `A_t = |∇û|² / ⟨∇|∇û|, ν⟩`.
    pub area_ratio: f64,
    /// `F'(t) t / F(t)`.
    pub log_slope: f64,
    /// Radial and tangential eigenvalues of `∇²Q`.
    pub q_hessian: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub levels: Vec<RigidityLevel>,
    /// Reference constant `C` in `|∇û| = C û^{2/(3-p)}`.
    pub gradient_constant: f64,
    pub report: MonotonicityReport,
}

/// Evaluate the flat-space equality diagnostics at the given levels.
///
/// Deviations from the flat values enter the report as negative margins;
/// they are asserted only for flat metrics and recorded otherwise.
pub fn rigidity_diagnostics(profile: &GreenProfile, levels: &[f64], ctx: &CheckContext) -> Result<RigidityReport> {
    let p = profile.p().value();
    let metric = profile.metric();
    let mut trimmed = Vec::new();
    let mut rows = Vec::with_capacity(levels.len());
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        let df = match log_derivative(profile, t) {
            Ok(d) => d.value,
            Err(crate::error::Error::Differentiation { .. }) => {
                trimmed.push(t);
                continue;
            }
            Err(e) => return Err(e),
        };
        let lf = profile.level_functionals(t)?;
        let r = lf.r_t;
        let s = profile.gradient_at(r);
        let ds = profile.gradient_slope_at(r);
        let h = profile.hessian_at(r)?;
        rows.push((t, r, s, ds, h, df, lf.f));
    }
    if rows.is_empty() {
        return Err(crate::error::Error::Differentiation {
            t: sorted.first().copied().unwrap_or(f64::NAN),
            detail: "every level was trimmed; the level range is too narrow".into(),
        });
    }

    let gradient_exponent = 2.0 / (3.0 - p);
    let ratios: Vec<f64> = rows.iter().map(|row| row.2 / row.0.powf(gradient_exponent)).collect();
    let gradient_constant = {
        let mut v = ratios.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    // Q = c_p² / (2C²) û^k, which is r²/2 in flat space.
    let c = profile.p().c_p();
    let k = -2.0 * (p - 1.0) / (3.0 - p);
    let kq = c * c / (2.0 * gradient_constant * gradient_constant);

    let mut out = Vec::with_capacity(rows.len());
    let mut margins = Vec::with_capacity(rows.len());
    for (&(t, r, s, ds, h, df, f), &gradient_ratio) in rows.iter().zip(&ratios) {
        let dq = kq * k * t.powf(k - 1.0) * (-s);
        let d2q = kq * k * ((k - 1.0) * t.powf(k - 2.0) * s * s + t.powf(k - 1.0) * (-ds));
        let hq = hessian_radial(metric, RadialJet { d1: dq, d2: d2q }, r)?;
        let row = RigidityLevel {
            t,
            r_t: r,
            gradient_ratio,
            hessian_ratio: h.tan / h.rad,
            area_ratio: (s * s / (-ds)) / (0.5 * (3.0 - p) * t),
            log_slope: df * t / f,
            q_hessian: [hq.rad, hq.tan],
        };
        let dev = [
            (row.gradient_ratio / gradient_constant - 1.0).abs(),
            (row.hessian_ratio / (-(p - 1.0) / 2.0) - 1.0).abs(),
            (row.area_ratio - 1.0).abs(),
            (row.log_slope / 2.0 - 1.0).abs(),
            (row.q_hessian[0] - 1.0).abs(),
            (row.q_hessian[1] - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        margins.push((vec![t], -dev));
        out.push(row);
    }

    let ctx = if ctx.flat {
        ctx.clone()
    } else {
        CheckContext {
            hypothesis: Hypothesis::OutOfHypothesis("equality case is asserted only on flat metrics".into()),
            ..ctx.clone()
        }
    };
    let mut report =
        MonotonicityReport::from_margins(ClaimId::Rigid, &ctx, levels.len(), margins, ctx.tolerances.rigidity);
    report.trimmed = trimmed;
    report.details.insert("gradient_constant".into(), gradient_constant);
    Ok(RigidityReport {
        levels: out,
        gradient_constant,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PParam, WarpedMetric};
    use crate::green::{level_grid, solve_green, GridSpec};
    use crate::monotonicity::{Status, Tolerances};
    use approx::assert_relative_eq;

    #[test]
    fn flat_space_is_rigid() {
        for p in [1.5, 2.0] {
            let g = solve_green(&WarpedMetric::euclidean(), PParam::new(p, false).unwrap(), GridSpec::default())
                .unwrap();
            let ctx = CheckContext::for_profile(&g, Tolerances::default()).unwrap();
            let levels = level_grid(g.level_range(), 12, 0.05).unwrap();
            let rig = rigidity_diagnostics(&g, &levels, &ctx).unwrap();
            assert_eq!(rig.report.status, Status::Pass, "{:?}", rig.report);
            let row = rig.levels[3];
            assert_relative_eq!(row.hessian_ratio, -(p - 1.0) / 2.0, max_relative = 1e-10);
            assert_relative_eq!(row.q_hessian[0], 1.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn curved_space_is_recorded() {
        let m = WarpedMetric::power_cap(0.8, 2.0).unwrap();
        let g = solve_green(&m, PParam::new(2.0, false).unwrap(), GridSpec::default()).unwrap();
        let ctx = CheckContext::for_profile(&g, Tolerances::default()).unwrap();
        let levels = level_grid(g.level_range(), 12, 0.05).unwrap();
        let rig = rigidity_diagnostics(&g, &levels, &ctx).unwrap();
        assert_eq!(rig.report.status, Status::Recorded);
        assert!(rig.report.worst_margin < -1e-4);
    }
}
