use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{mu_model, mu_model_prime, mu_model_second, GreenProfile};

/// Scaled deviations from the Euclidean model at one grid radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub r: f64,
    /// `|û - μ| r^{c_p}`.
    pub value_dev: f64,
    /// `|û' - μ'| r^{2/(p-1)}`.
    pub gradient_dev: f64,
    /// Frobenius norm of `∇²û - ∇²μ`, times `r^{(p+1)/(p-1)}`.
    pub hessian_dev: f64,
}

/// Rows over the innermost decade of the grid, ordered toward the pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsTable {
    pub p: f64,
    pub rows: Vec<AsymptoticsRow>,
    /// Size of `μ r^{c_p}`, `|μ'| r^{2/(p-1)}` and `μ'' r^{(p+1)/(p-1)}`;
    /// these are constants and set the roundoff floor of each column.
    pub scales: [f64; 3],
}

/// Relative roundoff floor below which column wiggles are not counted.
const NOISE: f64 = 1e-10;

impl AsymptoticsTable {
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| match k {
                0 => row.value_dev,
                1 => row.gradient_dev,
                _ => row.hessian_dev,
            })
            .collect()
    }

    /// Whether column `k` is non-increasing toward the pole up to roundoff.
    pub fn column_decreasing(&self, k: usize) -> bool {
        let floor = NOISE * self.scales[k];
        self.column(k).windows(2).all(|w| w[1] <= w[0] + floor)
    }

    pub fn is_decaying(&self) -> bool {
        (0..3).all(|k| self.column_decreasing(k))
    }

    pub fn final_values(&self) -> [f64; 3] {
        let last = self.rows.last().expect("table has rows");
        [last.value_dev, last.gradient_dev, last.hessian_dev]
    }
}

/// Compare the profile with the Euclidean model over the grid's last decade.
pub fn asymptotics_check(profile: &GreenProfile) -> Result<AsymptoticsTable> {
    let p = profile.p().value();
    let c = profile.p().c_p();
    let r_min = profile.r_min();
    let mut rows = Vec::new();
    for (i, &r) in profile.radii().iter().enumerate().rev() {
        if r > 10.0 * r_min * (1.0 + 1e-12) {
            continue;
        }
        let mu = mu_model(p, r)?;
        let dmu = mu_model_prime(p, r)?;
        let d2mu = mu_model_second(p, r)?;
        let h = profile.hessian_at(r)?;
        let d_rad = h.rad - d2mu;
        let d_tan = h.tan - dmu / r;
        rows.push(AsymptoticsRow {
            r,
            value_dev: (profile.values()[i] - mu).abs() * r.powf(c),
            gradient_dev: (profile.derivatives()[i] - dmu).abs() * r.powf(c + 1.0),
            hessian_dev: (d_rad * d_rad + 2.0 * d_tan * d_tan).sqrt() * r.powf(c + 2.0),
        });
    }
    let one = 1.0;
    let scales = [
        mu_model(p, one)?,
        mu_model_prime(p, one)?.abs(),
        mu_model_second(p, one)?,
    ];
    Ok(AsymptoticsTable { p, rows, scales })
}
