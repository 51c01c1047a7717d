//! Curvature and Hessian formulas against finite differences of `w` alone.

use std::f64::consts::PI;

use pgreen_core::geometry::{certify, curvature_at, hessian_radial, PParam, RadialJet, WarpedMetric};
use pgreen_core::green::{solve_green, GridSpec};
use pgreen_core::numerics::log_space;

fn builtins() -> Vec<(&'static str, WarpedMetric)> {
    vec![
        ("euclidean", WarpedMetric::euclidean()),
        ("hyperbolic", WarpedMetric::hyperbolic()),
        ("sphere", WarpedMetric::sphere()),
        ("power_cap(0.8)", WarpedMetric::power_cap(0.8, 2.0).unwrap()),
        ("power_cap(0.6)", WarpedMetric::power_cap(0.6, 1.0).unwrap()),
    ]
}

/// Sample radii inside the domain, dropping those whose stencil `[r - 2h, r + 2h]`
/// straddles a junction.
fn sample_radii(m: &WarpedMetric, n: usize) -> Vec<f64> {
    let hi = if m.r_max().is_finite() { 0.95 * m.r_max() } else { 50.0 };
    let junctions = m.junctions();
    log_space(1e-3, hi, n)
        .into_iter()
        .filter(|&r| junctions.iter().all(|&j| (r - j).abs() > 3e-4 * r))
        .collect()
}

/// Five-point first and second derivatives.
fn fd5(f: impl Fn(f64) -> f64, r: f64, h: f64) -> (f64, f64) {
    let (m2, m1, z, p1, p2) = (f(r - 2.0 * h), f(r - h), f(r), f(r + h), f(r + 2.0 * h));
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
    (d1, d2)
}

#[test]
fn scalar_curvature_matches_finite_differences() {
    for (name, m) in builtins() {
        for r in sample_radii(&m, 300) {
            let h = 1e-4 * r;
            let (dw, d2w) = fd5(|x| m.w(x), r, h);
            let w = m.w(r);
            let fd = 2.0 * (1.0 - dw * dw) / (w * w) - 4.0 * d2w / w;
            let exact = curvature_at(&m, r).unwrap().scalar;
            let scale = exact.abs().max(1.0 / (w * w));
            assert!(
                (fd - exact).abs() <= 1e-6 * scale,
                "{name} r={r}: R = {exact}, finite differences {fd}"
            );
        }
    }
}

#[test]
fn warp_derivatives_are_consistent() {
    for (name, m) in builtins() {
        for r in sample_radii(&m, 256) {
            let (dw, d2w) = fd5(|x| m.w(x), r, 1e-4 * r);
            let scale = m.dw(r).abs().max(m.w(r) / r);
            assert!((dw - m.dw(r)).abs() <= 1e-8 * scale, "{name} r={r}: w' {} vs {dw}", m.dw(r));
            let scale2 = m.d2w(r).abs().max(m.w(r) / (r * r));
            assert!((d2w - m.d2w(r)).abs() <= 1e-6 * scale2, "{name} r={r}: w'' {} vs {d2w}", m.d2w(r));
        }
    }
}

#[test]
fn area_is_positive_and_round() {
    for (name, m) in builtins() {
        let hi = if m.r_max().is_finite() { 0.999 * m.r_max() } else { 100.0 };
        for r in log_space(1e-4, hi, 256) {
            let c = curvature_at(&m, r).unwrap();
            let w = m.w(r);
            assert!(c.area > 0.0, "{name} r={r}");
            assert_eq!(c.area, 4.0 * PI * w * w, "{name} r={r}");
            assert_eq!(m.area(r), c.area, "{name} r={r}");
        }
    }
}

#[test]
fn power_cap_grid_scan() {
    for (alpha, transition) in [(0.8, 2.0), (0.7, 2.0), (0.6, 1.0), (0.95, 5.0)] {
        let m = WarpedMetric::power_cap(alpha, transition).unwrap();
        let radii = log_space(1e-4, 1e4, 1000);
        for &r in &radii {
            assert!(m.d2w(r) <= 0.0, "α={alpha} r={r}: w'' = {}", m.d2w(r));
            let dw = m.dw(r);
            assert!(dw > 0.0 && dw <= 1.0, "α={alpha} r={r}: w' = {dw}");
        }
        let cert = certify(&m, &radii).unwrap();
        assert!(cert.nonnegative_scalar(), "α={alpha}: min R = {}", cert.min_scalar);
        for &r in &radii {
            let c = curvature_at(&m, r).unwrap();
            assert!(c.ric_radial >= -cert.ricci_lower_bound && c.ric_tangential >= -cert.ricci_lower_bound);
        }
    }
}

#[test]
fn laplacian_matches_divergence_form() {
    // f = exp(-r) on every metric: Δf = (A f')' / A.
    for (name, m) in builtins() {
        for r in sample_radii(&m, 200) {
            let h = 1e-4 * r;
            let jet = RadialJet {
                d1: -(-r).exp(),
                d2: (-r).exp(),
            };
            let lap = hessian_radial(&m, jet, r).unwrap().laplacian();
            let (flux_slope, _) = fd5(|x| m.area(x) * -(-x).exp(), r, h);
            let fd = flux_slope / m.area(r);
            let scale = jet.d2.abs() + 2.0 * (jet.d1 * m.dw(r) / m.w(r)).abs();
            assert!((lap - fd).abs() <= 1e-6 * scale, "{name} r={r}: Δf = {lap} vs {fd}");
        }
    }
}

#[test]
fn green_laplacian_matches_divergence_form() {
    for m in [WarpedMetric::euclidean(), WarpedMetric::power_cap(0.8, 2.0).unwrap()] {
        for p in [1.5, 2.0] {
            let g = solve_green(&m, PParam::new(p, false).unwrap(), GridSpec::default()).unwrap();
            for r in log_space(1e-2, 20.0, 100) {
                if m.junctions().iter().any(|&j| (r - j).abs() <= 3e-4 * r) {
                    continue;
                }
                let hess = g.hessian_at(r).unwrap();
                let (flux_slope, _) = fd5(|x| -m.area(x) * g.gradient_at(x), r, 1e-4 * r);
                let fd = flux_slope / m.area(r);
                let scale = hess.rad.abs() + 2.0 * hess.tan.abs();
                assert!(
                    (hess.laplacian() - fd).abs() <= 1e-6 * scale,
                    "{} p={p} r={r}: Δû = {} vs {fd}",
                    m.family(),
                    hess.laplacian()
                );
            }
        }
    }
}
