//! Comparison of the entropic values of `f_a` seen at depths one and two.

use rayon::prelude::*;

use crate::error::{MirmError, Result};
use crate::finite::measures::FiniteModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub a: f64,
    pub rho_t1: f64,
    pub rho_t2: f64,
    /// `rho_t1 - rho_t2`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub gamma: f64,
    pub rows: Vec<ScanRow>,
    pub max_abs_gap: f64,
    pub argmax_a: f64,
}

impl ScanTable {
    pub const HEADER: [&'static str; 4] = ["a", "rho_t1", "rho_t2", "gap"];
}

pub fn noncompliance_scan(model: &FiniteModel, gamma: f64, a_values: &[f64]) -> Result<ScanTable> {
    if a_values.is_empty() {
        return Err(MirmError::InvalidInput("at least one value of a is required".into()));
    }
    if let Some(a) = a_values.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(MirmError::InvalidInput(format!("a must be positive and finite, got {a}")));
    }
    if model.market().depth() < 2 {
        return Err(MirmError::Structural("the scan needs a tree of depth two".into()));
    }
    let rows = a_values
        .par_iter()
        .map(|&a| {
            let f = model.indicator_claim(a)?;
            let rho_t1 = model.entropic_rho_dual(&f, 1, gamma)?;
            let rho_t2 = model.entropic_rho_dual(&f, 2, gamma)?;
            Ok(ScanRow { a, rho_t1, rho_t2, gap: rho_t1 - rho_t2 })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .fold(&rows[0], |b, r| if r.gap.abs() > b.gap.abs() { r } else { b });
    Ok(ScanTable { gamma, max_abs_gap: best.gap.abs(), argmax_a: best.a, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_vanishes_as_a_shrinks() {
        let m = FiniteModel::example();
        let t = noncompliance_scan(&m, 1.0, &[1e-6, 1e-3, 1.0]).unwrap();
        assert!(t.rows[0].gap.abs() < 1e-7);
        assert!(t.rows[0].gap.abs() < t.rows[1].gap.abs());
        assert_eq!(t.argmax_a, 1.0);
    }

    #[test]
    fn large_a_approaches_superhedging_slope() {
        // The optimal ν drifts to 1/3, where the last branch carries no
        // martingale weight; both values stay bounded as a grows.
        let m = FiniteModel::example();
        let t = noncompliance_scan(&m, 1.0, &[64.0, 256.0]).unwrap();
        for r in &t.rows {
            assert!(r.rho_t1 / r.a > -0.02 && r.rho_t2 / r.a > -0.02);
            assert!(r.gap.abs() / r.a < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let m = FiniteModel::example();
        assert!(noncompliance_scan(&m, 1.0, &[]).is_err());
        assert!(noncompliance_scan(&m, 1.0, &[1.0, -2.0]).is_err());
    }
}
