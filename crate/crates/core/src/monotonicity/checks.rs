use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::green::LevelSource;
use crate::numerics::diff::{central_richardson, Derivative};

use super::{CheckContext, ClaimId, LambdaBeta, MonotonicityReport};

/// Initial step, in `ln t`, of the Richardson tableau for `F'`.
const LOG_STEP: f64 = 1e-3;

/// `F'(t)` by Richardson-extrapolated central differences in `ln t`.
pub fn log_derivative(source: &dyn LevelSource, t: f64) -> Result<Derivative> {
    let (lo, hi) = source.level_range();
    let x = t.ln();
    if !(t > 0.0 && x - LOG_STEP >= lo.ln() && x + LOG_STEP <= hi.ln()) {
        return Err(Error::Differentiation {
            t,
            detail: format!("stencil of half-width {LOG_STEP} in ln t leaves the level range ({lo}, {hi})"),
        });
    }
    let d = central_richardson(|y| source.f_value(y.exp()), x, LOG_STEP)?;
    Ok(Derivative {
        value: d.value / t,
        error: d.error / t,
    })
}

fn sorted_levels(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.is_empty() || levels.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("levels must be a non-empty list of positive numbers".into()));
    }
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Levels whose difference stencil fits in the range, and those that do not.
fn split_differentiable(source: &dyn LevelSource, levels: &[f64]) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let mut kept = Vec::new();
    let mut trimmed = Vec::new();
    for &t in levels {
        match log_derivative(source, t) {
            Ok(d) => kept.push((t, d.value)),
            Err(Error::Differentiation { .. }) => trimmed.push(t),
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::Differentiation {
            t: levels[0],
            detail: "every level was trimmed; the level range is too narrow".into(),
        });
    }
    Ok((kept, trimmed))
}

fn flat_coefficient(source: &dyn LevelSource) -> f64 {
    let c = source.p().c_p();
    4.0 * PI * c * c
}

/// `F'(t) ≤ 4π c_p² t + F/t`, margin normalized by `max(|𝔐|, 4π c_p² t)`.
pub fn check_theorem_a(source: &dyn LevelSource, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
    let levels = sorted_levels(levels)?;
    let k = flat_coefficient(source);
    let (kept, trimmed) = split_differentiable(source, &levels)?;
    let mut margins = Vec::with_capacity(kept.len());
    for (t, df) in kept {
        let f = source.f_value(t)?;
        let m = f / t - k * t;
        let scale = m.abs().max(k * t);
        margins.push((vec![t], (k * t + f / t - df) / scale));
    }
    let mut report = MonotonicityReport::from_margins(ClaimId::T1a, ctx, levels.len(), margins, ctx.tolerances.margin);
    report.trimmed = trimmed;
    Ok(report)
}

/// `𝔐(t₁) ≥ 𝔐(t₂)` for consecutive levels `t₁ < t₂`.
pub fn check_theorem_b(source: &dyn LevelSource, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
    let levels = sorted_levels(levels)?;
    let k = flat_coefficient(source);
    let m: Vec<f64> = levels
        .iter()
        .map(|&t| Ok(source.f_value(t)? / t - k * t))
        .collect::<Result<_>>()?;
    let margins = levels
        .windows(2)
        .zip(m.windows(2))
        .map(|(t, mm)| {
            let scale = mm[0].abs().max(mm[1].abs()).max(k * t[1]);
            (vec![t[0], t[1]], (mm[0] - mm[1]) / scale)
        })
        .collect();
    Ok(MonotonicityReport::from_margins(ClaimId::T1b, ctx, levels.len(), margins, ctx.tolerances.margin))
}

/// Bound on `𝓖 = F' + αF/t` and monotonicity of `𝓘 = t^α F - κ t^{α+2}`,
/// with `α` and `κ` from the pair `(λ, β)`.
pub fn check_generalized(
    source: &dyn LevelSource,
    lb: LambdaBeta,
    levels: &[f64],
    ctx: &CheckContext,
) -> Result<(MonotonicityReport, MonotonicityReport)> {
    if !lb.admissible {
        return Err(Error::InvalidArgument(format!(
            "(λ, β) = ({}, {}) is not admissible at p = {} (constraint residual {:e})",
            lb.lambda, lb.beta, lb.p, lb.exact_constraint_residual
        )));
    }
    if (lb.p - source.p().value()).abs() > 1e-15 {
        return Err(Error::InvalidArgument(format!(
            "(λ, β) built for p = {} but the levels have p = {}",
            lb.p,
            source.p().value()
        )));
    }
    let alpha = lb.exponent();
    if (alpha + 2.0).abs() < 1e-12 {
        return Err(Error::InvalidArgument("exponent α = -2 makes 𝓘 undefined".into()));
    }
    let bound_coef = lb.g_bound_coefficient();
    let kappa = lb.i_coefficient();
    let levels = sorted_levels(levels)?;

    let (kept, trimmed) = split_differentiable(source, &levels)?;
    let mut g_margins = Vec::with_capacity(kept.len());
    for (t, df) in kept {
        let f = source.f_value(t)?;
        let g = df + alpha * f / t;
        let bound = bound_coef * t;
        let scale = df.abs().max((alpha * f / t).abs()).max(bound);
        g_margins.push((vec![t], (bound - g) / scale));
    }
    let mut g_report =
        MonotonicityReport::from_margins(ClaimId::T4G, ctx, levels.len(), g_margins, ctx.tolerances.margin);
    g_report.trimmed = trimmed;
    g_report.details.insert("lambda".into(), lb.lambda);
    g_report.details.insert("beta".into(), lb.beta);
    g_report.details.insert("alpha".into(), alpha);

    // Terms of 𝓘 and their size, for normalization.
    let terms: Vec<(f64, f64)> = levels
        .iter()
        .map(|&t| {
            let a = t.powf(alpha) * source.f_value(t)?;
            let b = kappa * t.powf(alpha + 2.0);
            Ok((a - b, a.abs().max(b.abs())))
        })
        .collect::<Result<_>>()?;
    let i_margins = levels
        .windows(2)
        .zip(terms.windows(2))
        .map(|(t, v)| (vec![t[0], t[1]], (v[0].0 - v[1].0) / v[0].1.max(v[1].1)))
        .collect();
    let mut i_report =
        MonotonicityReport::from_margins(ClaimId::T4I, ctx, levels.len(), i_margins, ctx.tolerances.margin);
    i_report.details.insert("lambda".into(), lb.lambda);
    i_report.details.insert("beta".into(), lb.beta);
    i_report.details.insert("alpha".into(), alpha);

    // For the default pair 𝓘 must coincide with 𝔐 level by level.
    if lb.is_default_pair() {
        let k = flat_coefficient(source);
        let mut worst = 0.0f64;
        for (&t, &(i_val, size)) in levels.iter().zip(&terms) {
            let m = source.f_value(t)? / t - k * t;
            worst = worst.max((i_val - m).abs() / size.max(m.abs()));
        }
        i_report.details.insert("reduction_residual".into(), worst);
        if worst > ctx.tolerances.identity {
            i_report.fail_consistency(&format!("𝓘 differs from 𝔐 by {worst:e} for the default pair"));
        }
    }
    Ok((g_report, i_report))
}

/// `F(t) ≤ 4π c_p² t²`.
pub fn check_corollary_c(source: &dyn LevelSource, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
    Ok(check_corollary_cd(source, levels, ctx)?.0)
}

/// `Area(Σ_t) ≥ (4π c_p² t²)^{-(p-1)/(3-p)}`.
pub fn check_corollary_d(source: &dyn LevelSource, levels: &[f64], ctx: &CheckContext) -> Result<MonotonicityReport> {
    Ok(check_corollary_cd(source, levels, ctx)?.1)
}

/// Both comparison bounds, plus the Hölder chain
/// `F^{(p-1)/2} Area^{(3-p)/2} ≥ 1` that links them, recorded on the area report.
pub fn check_corollary_cd(
    source: &dyn LevelSource,
    levels: &[f64],
    ctx: &CheckContext,
) -> Result<(MonotonicityReport, MonotonicityReport)> {
    let cert = ctx.certification.ok_or_else(|| {
        Error::InvalidArgument("comparison bounds need a curvature certification (Ric ≥ -k) of the metric".into())
    })?;
    let levels = sorted_levels(levels)?;
    let p = source.p().value();
    let k = flat_coefficient(source);
    let mut c_margins = Vec::with_capacity(levels.len());
    let mut d_margins = Vec::with_capacity(levels.len());
    let mut holder_min = f64::INFINITY;
    for &t in &levels {
        let lf = source.functionals(t)?;
        let bound_f = k * t * t;
        c_margins.push((vec![t], (bound_f - lf.f) / bound_f));
        let bound_area = bound_f.powf(-(p - 1.0) / (3.0 - p));
        d_margins.push((vec![t], (lf.area - bound_area) / bound_area));
        let chain = lf.f.powf(0.5 * (p - 1.0)) * lf.area.powf(0.5 * (3.0 - p));
        holder_min = holder_min.min(chain);
    }
    let tol = ctx.tolerances.margin;
    let mut c_report = MonotonicityReport::from_margins(ClaimId::C1c, ctx, levels.len(), c_margins, tol);
    let mut d_report = MonotonicityReport::from_margins(ClaimId::C1d, ctx, levels.len(), d_margins, tol);
    for r in [&mut c_report, &mut d_report] {
        r.details.insert("ricci_lower_bound".into(), cert.ricci_lower_bound);
    }
    d_report.details.insert("holder_min".into(), holder_min);
    if holder_min < 1.0 - ctx.tolerances.holder {
        d_report.fail_consistency(&format!("F^((p-1)/2) Area^((3-p)/2) = {holder_min} < 1"));
    }
    Ok((c_report, d_report))
}
