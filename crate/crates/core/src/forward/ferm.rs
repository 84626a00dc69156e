use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MirmError, Result};
use crate::forward::claim::{grid_index, PathClaim};
use crate::forward::paths::{fill_path, PathBuf};
use crate::forward::spec::CoefficientSpec;
use crate::numeric::{item_rng, mean_and_se, mix_seed, stable_sum, REDUCE_CHUNK};

const BATCHES: usize = 50;

/// Piecewise-constant dollar positions in the asset, one per time cell.
///
/// Positions are bounded by `bound`. A strategy is admissible when
/// `Σ |θ_j| M_j <= gains_bound`, where `M_j` is the largest absolute
/// cell return seen on the simulated paths, so every simulated gain is
/// bounded by `gains_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyFamily {
    pub cell_width: f64,
    pub bound: f64,
    pub gains_bound: f64,
}

impl Default for StrategyFamily {
    fn default() -> Self {
        Self { cell_width: 0.125, bound: 5.0, gains_bound: 50.0 }
    }
}

impl StrategyFamily {
    fn check(&self, dt: f64) -> Result<usize> {
        if !(self.bound > 0.0 && self.gains_bound > 0.0) {
            return Err(MirmError::InvalidInput("strategy bounds must be positive".into()));
        }
        let per = grid_index(self.cell_width, dt, usize::MAX >> 8)
            .map_err(|_| MirmError::InvalidInput(format!("cell width {} is not a multiple of dt {dt}", self.cell_width)))?;
        if per == 0 {
            return Err(MirmError::InvalidInput("cell width must be positive".into()));
        }
        Ok(per)
    }

    pub fn cells(&self, steps: usize, dt: f64) -> Result<usize> {
        Ok(steps.div_ceil(self.check(dt)?))
    }

    pub fn is_admissible(&self, theta: &[f64], max_returns: &[f64]) -> bool {
        theta.iter().all(|t| t.abs() <= self.bound)
            && theta.iter().zip(max_returns).map(|(t, m)| t.abs() * m).sum::<f64>() <= self.gains_bound
    }
}

/// Per-path reduction of a simulation at horizon `t`: the claim, the
/// log-weight `ln Z_t + A_t / 2`, `1 / Y_t` and the cell returns
/// `Σ σ (λ dt + ΔW¹)`.
#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub cells: usize,
    pub claim: Vec<f64>,
    pub log_weight: Vec<f64>,
    pub inv_y: Vec<f64>,
    pub a: Vec<f64>,
    pub returns: Vec<f64>,
    pub max_returns: Vec<f64>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.claim.len()
    }

    pub fn draw(
        spec: &CoefficientSpec,
        claim: &PathClaim,
        t: f64,
        family: &StrategyFamily,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if n_paths < 2 {
            return Err(MirmError::InvalidInput("need at least two paths".into()));
        }
        let steps = grid_index(t, spec.dt, spec.n_steps)?;
        let tc = grid_index(claim.maturity(), spec.dt, spec.n_steps)?;
        if tc > steps {
            return Err(MirmError::InvalidInput(format!(
                "horizon {t} is before the claim maturity {}",
                claim.maturity()
            )));
        }
        let per = family.check(spec.dt)?;
        let cells = steps.div_ceil(per);
        let rows: Vec<(f64, f64, f64, f64, Vec<f64>)> = (0..n_paths)
            .into_par_iter()
            .map_init(PathBuf::default, |buf, i| {
                fill_path(spec, seed, i as u64, steps, buf);
                let c = claim.eval(&buf.view(spec.dt))?;
                let mut r = vec![0.0; cells];
                for k in 0..steps {
                    let sig = spec.sigma.at(k);
                    r[k / per] += sig * (spec.lambda.at(k) * spec.dt + buf.w1[k + 1] - buf.w1[k]);
                }
                let (z, a, y) = (buf.z[steps], buf.a[steps], buf.y[steps]);
                if !(y > 0.0 && y.is_finite() && z > 0.0 && z.is_finite()) {
                    return Err(MirmError::Numerical(format!("degenerate Y or Z on path {i}")));
                }
                Ok((c, z.ln() + 0.5 * a, 1.0 / y, a, r))
            })
            .collect::<Result<_>>()?;
        let mut s = Sample {
            cells,
            claim: Vec::with_capacity(n_paths),
            log_weight: Vec::with_capacity(n_paths),
            inv_y: Vec::with_capacity(n_paths),
            a: Vec::with_capacity(n_paths),
            returns: Vec::with_capacity(n_paths * cells),
            max_returns: vec![0.0; cells],
        };
        for (c, w, iy, a, r) in rows {
            s.claim.push(c);
            s.log_weight.push(w);
            s.inv_y.push(iy);
            s.a.push(a);
            for (m, v) in s.max_returns.iter_mut().zip(&r) {
                *m = m.max(v.abs());
            }
            s.returns.extend(r);
        }
        Ok(s)
    }

    /// `ln E[e^{ℓ}]` for `ℓ_i = log_weight_i - inv_y_i (x_i + θ·R_i)`.
    fn exponents(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let g: f64 = theta.iter().zip(self.row(i)).map(|(t, r)| t * r).sum();
                self.log_weight[i] - self.inv_y[i] * (x[i] + g)
            })
            .collect()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.returns[i * self.cells..(i + 1) * self.cells]
    }
}

/// `(max, Σ w, Σ w u, Σ w u²)` with `w = e^{b - u·step - max}`, summed in a
/// fixed order.
fn moments(base: &[f64], u: &[f64], step: f64) -> (f64, f64, f64, f64) {
    let m = base
        .par_iter()
        .zip(u)
        .map(|(b, v)| b - v * step)
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let parts: Vec<(f64, f64, f64)> = base
        .par_chunks(REDUCE_CHUNK)
        .zip(u.par_chunks(REDUCE_CHUNK))
        .map(|(bc, uc)| {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for (b, v) in bc.iter().zip(uc) {
                let w = (b - v * step - m).exp();
                s0 += w;
                s1 += w * v;
                s2 += w * v * v;
            }
            (s0, s1, s2)
        })
        .collect();
    let (a, b, c): (Vec<f64>, Vec<f64>, Vec<f64>) =
        parts.into_iter().fold((vec![], vec![], vec![]), |(mut a, mut b, mut c), (x, y, z)| {
            a.push(x);
            b.push(y);
            c.push(z);
            (a, b, c)
        });
    (m, stable_sum(&a), stable_sum(&b), stable_sum(&c))
}

/// Minimizes the convex map `s ↦ ln Σ e^{b_i - u_i s}` on `[lo, hi]`.
fn line_min(base: &[f64], u: &[f64], lo: f64, hi: f64) -> f64 {
    let slope = |s: f64| {
        let (_, s0, s1, s2) = moments(base, u, s);
        let mean = s1 / s0;
        (-mean, (s2 / s0 - mean * mean).max(0.0))
    };
    if lo >= hi {
        return lo;
    }
    let (dl, _) = slope(lo);
    if dl >= 0.0 {
        return lo;
    }
    let (dh, _) = slope(hi);
    if dh <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    let mut s = 0.0f64.clamp(lo, hi);
    for _ in 0..100 {
        let (d, h) = slope(s);
        if d == 0.0 {
            return s;
        }
        if d < 0.0 {
            a = s;
        } else {
            b = s;
        }
        let newton = if h > 0.0 { s - d / h } else { f64::NAN };
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - s).abs() <= 1e-13 * (1.0 + s.abs()) || b - a <= 1e-13 * (1.0 + s.abs()) {
            return next;
        }
        s = next;
    }
    s
}

/// Coordinate descent for `min_θ ln mean e^{ℓ(θ)}` over admissible
/// strategies. Returns the optimal positions and the exponents `ℓ(θ*)`.
fn optimize(sample: &Sample, x: &[f64], family: &StrategyFamily) -> (Vec<f64>, Vec<f64>) {
    let cells = sample.cells;
    let mut theta = vec![0.0; cells];
    let mut base = sample.exponents(x, &theta);
    if cells == 0 {
        return (theta, base);
    }
    let mut u = vec![0.0; sample.len()];
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for j in 0..cells {
            let mj = sample.max_returns[j];
            let used: f64 = (0..cells).filter(|&k| k != j).map(|k| theta[k].abs() * sample.max_returns[k]).sum();
            let mut cap = family.bound;
            if mj > 0.0 {
                cap = cap.min(((family.gains_bound - used) / mj).max(0.0));
            }
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = sample.inv_y[i] * sample.returns[i * cells + j];
            }
            let step = line_min(&base, &u, -cap - theta[j], cap - theta[j]);
            if step != 0.0 {
                for (b, ui) in base.iter_mut().zip(&u) {
                    *b -= ui * step;
                }
                theta[j] += step;
            }
            moved = moved.max(step.abs());
        }
        if moved <= 1e-10 {
            break;
        }
    }
    (theta, base)
}

/// `(ln mean e^{ℓ}, standard error of that log)` from batch means.
fn log_mean_with_se(exponents: &[f64]) -> (f64, f64) {
    let m = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
    let n = v.len();
    let (mean, se) = if n >= 2 * BATCHES {
        let size = n / BATCHES;
        let means: Vec<f64> = (0..BATCHES)
            .map(|b| {
                let end = if b + 1 == BATCHES { n } else { (b + 1) * size };
                stable_sum(&v[b * size..end]) / (end - b * size) as f64
            })
            .collect();
        let (_, se) = mean_and_se(&means);
        (stable_sum(&v) / n as f64, se)
    } else {
        mean_and_se(&v)
    };
    (m + mean.ln(), se / mean)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
}

/// `ρ(C) = inf_θ (1/γ) ln E[-U_t(C + G^θ)]` over the strategy family, with
/// `t` on the grid and not before the claim maturity.
pub fn ferm_mc(
    spec: &CoefficientSpec,
    claim: &PathClaim,
    t: f64,
    family: &StrategyFamily,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let sample = Sample::draw(spec, claim, t, family, n_paths, seed)?;
    let (theta, base) = optimize(&sample, &sample.claim, family);
    let (lv, se) = log_mean_with_se(&base);
    Ok(McEstimate {
        value: lv / spec.gamma,
        std_error: se / spec.gamma,
        horizon: t,
        n_paths,
        seed,
        theta,
    })
}

/// `min_θ ln mean e^{-γ (x_i + θ·R_i)}` on a plain sample.
fn classical_log_value(sample: &Sample, x: &[f64], gamma: f64, family: &StrategyFamily) -> (f64, f64) {
    let plain = Sample {
        log_weight: vec![0.0; sample.len()],
        inv_y: vec![gamma; sample.len()],
        ..sample.clone()
    };
    let (_, base) = optimize(&plain, x, family);
    log_mean_with_se(&base)
}

/// Both sides of the entropic representation when `δ = φ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub horizon: f64,
    pub ferm: f64,
    pub ferm_se: f64,
    /// Cash equivalent `ν` of `C - A_t / 2γ` under classical exponential
    /// utility.
    pub nu: f64,
    pub nu_se: f64,
    /// `H_t = -ln inf E[e^{-γ G_t}]`.
    pub h: f64,
    pub h_se: f64,
    /// `-ν - H_t / γ`.
    pub rhs: f64,
    pub rhs_se: f64,
    pub diff: f64,
    pub combined_se: f64,
}

impl ConsistencyReport {
    pub fn within(&self, k: f64) -> bool {
        self.diff.abs() <= k * self.combined_se + 1e-12
    }
}

/// Compares `ρ(C)` with `-ν(C - A_t/2γ; t) - H_t/γ`, both estimated on the
/// same paths.
pub fn entropic_consistency(
    spec: &CoefficientSpec,
    claim: &PathClaim,
    t: f64,
    family: &StrategyFamily,
    n_paths: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if !spec.is_plain() {
        return Err(MirmError::Model("the entropic representation needs delta = phi = 0".into()));
    }
    let g = spec.gamma;
    let sample = Sample::draw(spec, claim, t, family, n_paths, seed)?;
    let (_, base) = optimize(&sample, &sample.claim, family);
    let (lv, se) = log_mean_with_se(&base);
    let shifted: Vec<f64> = sample.claim.iter().zip(&sample.a).map(|(c, a)| c - a / (2.0 * g)).collect();
    let (lx, sx) = classical_log_value(&sample, &shifted, g, family);
    let (l0, s0) = classical_log_value(&sample, &vec![0.0; sample.len()], g, family);
    let h = -l0;
    let nu = -(lx - l0) / g;
    let rhs = -nu - h / g;
    let (ferm, ferm_se, rhs_se) = (lv / g, se / g, sx / g);
    Ok(ConsistencyReport {
        horizon: t,
        ferm,
        ferm_se,
        nu,
        nu_se: sx.hypot(s0) / g,
        h,
        h_se: s0,
        rhs,
        rhs_se,
        diff: ferm - rhs,
        combined_se: ferm_se.hypot(rhs_se),
    })
}

/// `ρ(C)` computed with the density `Z` against the same value computed in
/// the shifted market with price of risk `λ + φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub weighted: McEstimate,
    pub shifted: McEstimate,
    pub diff: f64,
    pub combined_se: f64,
}

pub fn density_equivalence(
    spec: &CoefficientSpec,
    claim: &PathClaim,
    t: f64,
    family: &StrategyFamily,
    n_paths: usize,
    seed: u64,
) -> Result<DensityReport> {
    if (0..spec.n_steps).any(|k| spec.delta.at(k) != 0.0) {
        return Err(MirmError::Model("the density comparison needs delta = 0".into()));
    }
    let weighted = ferm_mc(spec, claim, t, family, n_paths, seed)?;
    let shifted = ferm_mc(&spec.under_density(), claim, t, family, n_paths, mix_seed(seed, 1))?;
    Ok(DensityReport {
        diff: weighted.value - shifted.value,
        combined_se: weighted.std_error.hypot(shifted.std_error),
        weighted,
        shifted,
    })
}

/// One strategy in the supermartingale probe: `E[U_t(x + G_t)]` with its
/// standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub theta: Vec<f64>,
    pub expected_utility: f64,
    pub std_error: f64,
}

impl ProbeRow {
    /// `(E[U_t] - U_0) / SE`; positive values are excesses over `U_0(x)`.
    pub fn excess_in_se(&self, u0: f64) -> f64 {
        let gap = self.expected_utility - u0;
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap > 1e-12 * u0.abs() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub horizon: f64,
    pub wealth: f64,
    pub u0: f64,
    pub rows: Vec<ProbeRow>,
    /// Numerically optimal strategy.
    pub best: ProbeRow,
    pub max_excess_in_se: f64,
}

fn probe_row(sample: &Sample, x: &[f64], theta: Vec<f64>) -> ProbeRow {
    let base = sample.exponents(x, &theta);
    let (lv, se) = log_mean_with_se(&base);
    let eu = -lv.exp();
    ProbeRow { theta, expected_utility: eu, std_error: se * eu.abs() }
}

/// Estimates `E[U_t(x + G_t)]` for `n_strategies` random admissible
/// strategies and for the numerically best one, against `U_0(x) = -e^{-γx}`.
pub fn supermartingale_probe(
    spec: &CoefficientSpec,
    t: f64,
    x: f64,
    family: &StrategyFamily,
    n_strategies: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let sample = Sample::draw(spec, &PathClaim::constant(0.0), t, family, n_paths, seed)?;
    let xs = vec![x; sample.len()];
    let u0 = -(-spec.gamma * x).exp();
    let strategy_seed = mix_seed(seed, 0x5354_5241);
    let mut rows = Vec::with_capacity(n_strategies);
    let mut k = 0u64;
    while rows.len() < n_strategies {
        let mut rng = item_rng(strategy_seed, k);
        k += 1;
        let theta: Vec<f64> = (0..sample.cells).map(|_| rng.random_range(-family.bound..=family.bound)).collect();
        if !family.is_admissible(&theta, &sample.max_returns) {
            continue;
        }
        rows.push(probe_row(&sample, &xs, theta));
        if k > 1000 * (n_strategies as u64 + 1) {
            return Err(MirmError::Numerical("admissible strategies are too rare to sample".into()));
        }
    }
    let (theta, _) = optimize(&sample, &xs, family);
    let best = probe_row(&sample, &xs, theta);
    let max_excess_in_se =
        rows.iter().chain(std::iter::once(&best)).map(|r| r.excess_in_se(u0)).fold(f64::NEG_INFINITY, f64::max);
    Ok(ProbeReport { horizon: t, wealth: x, u0, rows, best, max_excess_in_se })
}
