//! Maximization of concave objectives over the closed martingale family.

use crate::error::{MirmError, Result};
use crate::finite::family::MartingaleMeasureFamily;
use crate::numeric::grid_golden_max;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Grid points for one-dimensional families.
    pub grid: usize,
    /// Grid points per line search in coordinate ascent.
    pub line_grid: usize,
    /// Golden-section stopping width, relative to the search interval.
    pub rel_tol: f64,
    pub max_evals: usize,
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid: 2048,
            line_grid: 256,
            rel_tol: 1e-10,
            max_evals: 1_000_000,
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FamilyMax {
    pub arg: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `objective` over the closure of the family's domain.
///
/// One-dimensional families use a grid scan refined by golden section.
/// Higher dimensions use cyclic coordinate ascent from the interior point,
/// each line handled the same way on a coarser grid. The objective must be
/// concave for the result to be the global maximum.
pub fn maximize_over_family<F>(family: &MartingaleMeasureFamily, objective: F, opts: &SearchOptions) -> Result<FamilyMax>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = family.dim();
    if dim == 0 {
        return Ok(FamilyMax { arg: vec![], value: objective(&[]), evaluations: 1 });
    }
    if dim == 1 {
        let (lo, hi) = family.coordinate_interval(family.interior_point(), 0);
        let m = grid_golden_max(|x| objective(&[x]), lo, hi, opts.grid, opts.rel_tol, opts.max_evals)?;
        return Ok(FamilyMax { arg: vec![m.arg], value: m.value, evaluations: m.evaluations });
    }

    let mut theta = family.interior_point().to_vec();
    let mut value = objective(&theta);
    let mut evaluations = 1;
    for _ in 0..opts.max_sweeps {
        let before = value;
        for j in 0..dim {
            let (lo, hi) = family.coordinate_interval(&theta, j);
            let budget = opts.max_evals.saturating_sub(evaluations);
            let mut probe = theta.clone();
            let m = grid_golden_max(
                |x| {
                    probe[j] = x;
                    objective(&probe)
                },
                lo,
                hi,
                opts.line_grid,
                opts.rel_tol,
                budget,
            )?;
            evaluations += m.evaluations;
            if m.value > value {
                theta[j] = m.arg;
                value = m.value;
            }
        }
        if value - before <= 1e-15 * value.abs().max(1.0) {
            return Ok(FamilyMax { arg: theta, value, evaluations });
        }
    }
    Err(MirmError::Numerical(format!(
        "coordinate ascent did not settle in {} sweeps",
        opts.max_sweeps
    )))
}
