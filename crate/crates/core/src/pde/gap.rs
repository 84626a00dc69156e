use rayon::join;
use serde::Serialize;

use crate::error::{MirmError, Result};
use crate::pde::solve::{compute_g, solve_linear_f, solve_quasilinear_p, PdeSolution};
use crate::pde::spec::SvSpec;

/// Horizon comparison on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLevel {
    pub n_y: usize,
    pub steps_per_unit: usize,
    /// `max |p - p̄|` over `[0, T) × [-L/2, L/2]`.
    pub max_gap: f64,
    pub argmax_t: f64,
    pub argmax_y: f64,
    /// `max |f_y(T, ·)|` from central differences.
    pub max_abs_fy_terminal: f64,
    /// `min |ḡ(T, ·)|` over `[-L/2, L/2]` from the `g` equation.
    pub min_abs_gbar: f64,
    /// The same bound from central differences of `f̄`.
    pub min_abs_gbar_central: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub spec: SvSpec,
    pub coarse: GapLevel,
    pub fine: GapLevel,
    /// `|max_gap(fine) - max_gap(coarse)|`.
    pub gap_delta: f64,
    /// Relative change of `min |ḡ(T, ·)|` under refinement.
    pub gbar_rel_change: f64,
}

impl GapReport {
    /// `f_y(T, ·) = 0`, `ḡ(T, ·)` bounded away from zero and stable, and the
    /// price gap more than ten refinement deltas.
    pub fn passes(&self) -> bool {
        self.coarse.max_abs_fy_terminal == 0.0
            && self.coarse.min_abs_gbar > 0.0
            && self.gbar_rel_change < 0.1
            && self.coarse.max_gap > 10.0 * self.gap_delta
    }

    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (tag, l) in [("coarse", &self.coarse), ("fine", &self.fine)] {
            out.push((format!("{tag}.n_y"), l.n_y as f64));
            out.push((format!("{tag}.steps_per_unit"), l.steps_per_unit as f64));
            out.push((format!("{tag}.max_gap"), l.max_gap));
            out.push((format!("{tag}.argmax_t"), l.argmax_t));
            out.push((format!("{tag}.argmax_y"), l.argmax_y));
            out.push((format!("{tag}.max_abs_fy_terminal"), l.max_abs_fy_terminal));
            out.push((format!("{tag}.min_abs_gbar"), l.min_abs_gbar));
            out.push((format!("{tag}.min_abs_gbar_central"), l.min_abs_gbar_central));
        }
        out.push(("gap_delta".into(), self.gap_delta));
        out.push(("gbar_rel_change".into(), self.gbar_rel_change));
        out.push(("passes".into(), if self.passes() { 1.0 } else { 0.0 }));
        out
    }
}

/// `p` and `p̄` on one grid, with the solutions they were built from.
#[derive(Debug, Clone)]
pub struct HorizonPair {
    pub f: PdeSolution,
    pub f_bar: PdeSolution,
    pub p: PdeSolution,
    pub p_bar: PdeSolution,
    pub g_bar: PdeSolution,
    pub g_bar_central: PdeSolution,
}

pub fn solve_pair(spec: &SvSpec) -> Result<HorizonPair> {
    spec.validate()?;
    let (f, f_bar) = join(|| solve_linear_f(spec, spec.t), || solve_linear_f(spec, spec.t_bar));
    let (f, f_bar) = (f?, f_bar?);
    let (p, rest) = join(
        || solve_quasilinear_p(spec, &f, spec.t),
        || -> Result<_> { Ok((solve_quasilinear_p(spec, &f_bar, spec.t)?, compute_g(spec, &f_bar)?)) },
    );
    let (p_bar, g) = rest?;
    Ok(HorizonPair { f, f_bar, p: p?, p_bar, g_bar: g.pde, g_bar_central: g.central })
}

fn level(spec: &SvSpec) -> Result<GapLevel> {
    let pair = solve_pair(spec)?;
    let grid = &pair.f.grid;
    let window: Vec<usize> = (0..grid.n_y()).filter(|&j| grid.y[j].abs() <= 0.5 * spec.l + 1e-12).collect();
    let n = grid.steps(spec.t);
    let (mut max_gap, mut at) = (0.0f64, (0.0, 0.0));
    for k in 0..n {
        for &j in &window {
            let d = (pair.p.level(k)[j] - pair.p_bar.level(k)[j]).abs();
            if d > max_gap {
                max_gap = d;
                at = (pair.p.time(k), grid.y[j]);
            }
        }
    }
    let fy = crate::pde::scheme::derivative(pair.f.terminal(), grid.dy);
    let min_abs = |s: &PdeSolution| window.iter().map(|&j| s.level(n)[j].abs()).fold(f64::INFINITY, f64::min);
    Ok(GapLevel {
        n_y: spec.n_y,
        steps_per_unit: spec.steps_per_unit,
        max_gap,
        argmax_t: at.0,
        argmax_y: at.1,
        max_abs_fy_terminal: fy.iter().fold(0.0, |m, v| m.max(v.abs())),
        min_abs_gbar: min_abs(&pair.g_bar),
        min_abs_gbar_central: min_abs(&pair.g_bar_central),
    })
}

/// Compares the prices for horizons `T` and `T̄` of the claim maturing at
/// `T`, on the spec grid and on one refinement.
pub fn noncompliance_gap(spec: &SvSpec) -> Result<GapReport> {
    if spec.t_bar < spec.t {
        return Err(MirmError::InvalidInput("need T <= T_bar".into()));
    }
    let fine_spec = spec.refined();
    let (coarse, fine) = join(|| level(spec), || level(&fine_spec));
    let (coarse, fine) = (coarse?, fine?);
    let gbar_rel_change = if coarse.min_abs_gbar > 0.0 {
        (fine.min_abs_gbar - coarse.min_abs_gbar).abs() / coarse.min_abs_gbar
    } else {
        f64::INFINITY
    };
    Ok(GapReport {
        spec: spec.clone(),
        gap_delta: (fine.max_gap - coarse.max_gap).abs(),
        gbar_rel_change,
        coarse,
        fine,
    })
}
