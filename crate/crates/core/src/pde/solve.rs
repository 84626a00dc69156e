use std::fmt;

use serde::Serialize;

use crate::error::{MirmError, Result};
use crate::pde::scheme::{derivative, step, Coeffs};
use crate::pde::spec::{Grid1D, SvSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    F,
    FBar,
    G,
    GBar,
    P,
    PBar,
}

impl Which {
    pub fn as_str(self) -> &'static str {
        match self {
            Which::F => "f",
            Which::FBar => "f_bar",
            Which::G => "g",
            Which::GBar => "g_bar",
            Which::P => "p",
            Which::PBar => "p_bar",
        }
    }

    fn is_bar(self) -> bool {
        matches!(self, Which::FBar | Which::GBar | Which::PBar)
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values on the grid at times `k·dt`, `k = 0..=n`, with `n·dt` the
/// terminal time.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub which: Which,
    pub horizon: f64,
    pub grid: Grid1D,
    pub theta: f64,
    pub rannacher: bool,
    pub boundary: &'static str,
    pub warnings: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl PdeSolution {
    fn new(which: Which, horizon: f64, spec: &SvSpec, grid: &Grid1D, values: Vec<Vec<f64>>, max_drift: f64) -> Self {
        Self {
            which,
            horizon,
            grid: grid.clone(),
            theta: spec.theta,
            rannacher: spec.rannacher,
            boundary: "linear_extrapolation",
            warnings: grid.warnings(max_drift),
            values,
        }
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.grid.dt
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().expect("solution has a terminal level")
    }

    /// Linear interpolation in `y` at grid time `t`.
    pub fn at(&self, t: f64, y: f64) -> Result<f64> {
        let k = (t / self.grid.dt).round();
        if (k * self.grid.dt - t).abs() > 1e-9 || k < 0.0 || k as usize >= self.values.len() {
            return Err(MirmError::Structural(format!("time {t} is not a level of this solution")));
        }
        if !(y >= -self.grid.l && y <= self.grid.l) {
            return Err(MirmError::InvalidInput(format!("y = {y} is outside [-L, L]")));
        }
        let row = &self.values[k as usize];
        let x = (y + self.grid.l) / self.grid.dy;
        let j = (x.floor() as usize).min(row.len() - 2);
        let w = x - j as f64;
        Ok((1.0 - w) * row[j] + w * row[j + 1])
    }

    /// `(t, y, value)` rows, time-major.
    pub fn long_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(move |(k, row)| row.iter().zip(&self.grid.y).map(move |(v, y)| (self.time(k), *y, *v)))
    }
}

/// Runs `u_τ = ½u_yy + β u_y + κ u + s` backward from level `n` to 0.
fn march<F>(spec: &SvSpec, grid: &Grid1D, n: usize, terminal: Vec<f64>, mut coeffs: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(usize) -> Coeffs,
{
    let mut values = vec![Vec::new(); n + 1];
    let mut old = coeffs(n);
    values[n] = terminal;
    for k in (0..n).rev() {
        let new = coeffs(k);
        let first = k + 1 == n;
        values[k] = step(grid, &values[k + 1], &old, &new, spec.theta, spec.rannacher && first)?;
        old = new;
    }
    Ok(values)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `f_t + ½f_yy - ρλf_y - s·½(1-ρ²)λ²f = 0`, `f(horizon, ·) = 1`.
pub fn solve_linear_f(spec: &SvSpec, horizon: f64) -> Result<PdeSolution> {
    spec.validate()?;
    let grid = spec.grid();
    let n = grid.steps(horizon);
    if (n as f64 * grid.dt - horizon).abs() > 1e-9 || n == 0 {
        return Err(MirmError::InvalidInput(format!("horizon {horizon} is not a positive multiple of dt")));
    }
    let which = if (horizon - spec.t).abs() < 1e-12 { Which::F } else { Which::FBar };
    let mut c = Coeffs::zeros(grid.n_y());
    for (j, &y) in grid.y.iter().enumerate() {
        c.beta[j] = -spec.rho * spec.lambda(y);
        c.kappa[j] = -spec.decay(y);
    }
    let drift = max_abs(c.beta.iter().copied());
    let values = march(spec, &grid, n, vec![1.0; grid.n_y()], |_| c.clone())?;
    if values.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(MirmError::Numerical("f lost positivity; refine the grid".into()));
    }
    Ok(PdeSolution::new(which, horizon, spec, &grid, values, drift))
}

/// `g = f_y` from its own equation, alongside central differences of `f`.
#[derive(Debug, Clone)]
pub struct GSolution {
    pub pde: PdeSolution,
    pub central: PdeSolution,
}

/// Solves `g_t + ½g_yy - ρλg_y - A g - B = 0`, `g(horizon, ·) = 0`, with
/// `A = ρλ' + s·½(1-ρ²)λ²` and `B = s·(1-ρ²)λλ'f`.
pub fn compute_g(spec: &SvSpec, f: &PdeSolution) -> Result<GSolution> {
    let grid = f.grid.clone();
    let n = f.levels() - 1;
    let s = spec.fk_sign.factor();
    let a = spec.a();
    let base: Vec<(f64, f64, f64)> = grid
        .y
        .iter()
        .map(|&y| {
            let (l, lp) = (spec.lambda(y), spec.lambda_prime(y));
            (-spec.rho * l, -(spec.rho * lp + s * 0.5 * a * l * l), s * a * l * lp)
        })
        .collect();
    let coeffs = |k: usize| {
        let mut c = Coeffs::zeros(grid.n_y());
        for (j, &(b, kap, bb)) in base.iter().enumerate() {
            c.beta[j] = b;
            c.kappa[j] = kap;
            c.src[j] = -bb * f.level(k)[j];
        }
        c
    };
    let values = march(spec, &grid, n, vec![0.0; grid.n_y()], coeffs)?;
    let which = if f.which.is_bar() { Which::GBar } else { Which::G };
    let drift = max_abs(base.iter().map(|b| b.0));
    let central: Vec<Vec<f64>> = (0..=n).map(|k| derivative(f.level(k), grid.dy)).collect();
    Ok(GSolution {
        pde: PdeSolution::new(which, f.horizon, spec, &grid, values, drift),
        central: PdeSolution::new(which, f.horizon, spec, &grid, central, drift),
    })
}

/// `b = f_y / f - ρλ` at level `k`.
fn p_drift(spec: &SvSpec, f: &PdeSolution, k: usize) -> Vec<f64> {
    let row = f.level(k);
    let fy = derivative(row, f.grid.dy);
    f.grid.y.iter().enumerate().map(|(j, &y)| fy[j] / row[j] - spec.rho * spec.lambda(y)).collect()
}

fn p_setup(spec: &SvSpec, f: &PdeSolution, horizon: f64) -> Result<(usize, Which)> {
    let n = f.grid.steps(horizon);
    if n == 0 || (n as f64 * f.grid.dt - horizon).abs() > 1e-9 || n >= f.levels() {
        return Err(MirmError::InvalidInput(format!("claim horizon {horizon} must be a grid time within the f solve")));
    }
    spec.validate()?;
    Ok((n, if f.which.is_bar() { Which::PBar } else { Which::P }))
}

/// `p_t + ½p_yy + (f_y/f - ρλ)p_y + ½(1-ρ²)p_y² = 0`, `p(horizon, y) = y`,
/// through `v = e^{(1-ρ²)(p - y)}`, which solves the linear equation
/// `v_τ = ½v_yy + (a + b)v_y + (½a² + ab)v` with `v = 1` at the horizon.
pub fn solve_quasilinear_p(spec: &SvSpec, f: &PdeSolution, horizon: f64) -> Result<PdeSolution> {
    let (n, which) = p_setup(spec, f, horizon)?;
    let a = spec.a();
    let grid = f.grid.clone();
    let mut drift = 0.0f64;
    let coeffs = |k: usize| {
        let b = p_drift(spec, f, k);
        let mut c = Coeffs::zeros(grid.n_y());
        for (j, bj) in b.iter().enumerate() {
            c.beta[j] = a + bj;
            c.kappa[j] = 0.5 * a * a + a * bj;
        }
        drift = drift.max(max_abs(c.beta.iter().copied()));
        c
    };
    let v = march(spec, &grid, n, vec![1.0; grid.n_y()], coeffs)?;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for row in &v {
        if row.iter().any(|x| !(*x > 0.0)) {
            return Err(MirmError::Numerical(
                "transformed solution lost positivity; increase n_y or steps_per_unit".into(),
            ));
        }
        values.push(row.iter().zip(&grid.y).map(|(x, y)| y + x.ln() / a).collect());
    }
    if let Some(last) = values.last_mut() {
        last.clone_from(&grid.y);
    }
    Ok(PdeSolution::new(which, horizon, spec, &grid, values, drift))
}

/// The same `p` from a direct solve for `w = p - y` with the quadratic
/// gradient term iterated to convergence inside each step.
pub fn solve_quasilinear_p_lagged(spec: &SvSpec, f: &PdeSolution, horizon: f64) -> Result<PdeSolution> {
    let (n, which) = p_setup(spec, f, horizon)?;
    let a = spec.a();
    let grid = f.grid.clone();
    let ny = grid.n_y();
    let linear = |k: usize| {
        let b = p_drift(spec, f, k);
        let mut c = Coeffs::zeros(ny);
        for (j, bj) in b.iter().enumerate() {
            c.beta[j] = a + bj;
            c.src[j] = bj + 0.5 * a;
        }
        c
    };
    let with_square = |mut c: Coeffs, w: &[f64]| {
        let wy = derivative(w, grid.dy);
        for (s, d) in c.src.iter_mut().zip(&wy) {
            *s += 0.5 * a * d * d;
        }
        c
    };
    let mut w = vec![vec![0.0; ny]; n + 1];
    let mut drift = 0.0f64;
    for k in (0..n).rev() {
        let old = with_square(linear(k + 1), &w[k + 1]);
        let lin_new = linear(k);
        drift = drift.max(max_abs(lin_new.beta.iter().copied()));
        let mut guess = w[k + 1].clone();
        for it in 0.. {
            let new = with_square(lin_new.clone(), &guess);
            let next = step(&grid, &w[k + 1], &old, &new, spec.theta, spec.rannacher && k + 1 == n)?;
            let change = max_abs(next.iter().zip(&guess).map(|(x, y)| x - y));
            guess = next;
            if change <= 1e-14 {
                break;
            }
            if it == 100 {
                return Err(MirmError::Numerical("lagged quasilinear iteration did not converge".into()));
            }
        }
        w[k] = guess;
    }
    let values = w.iter().map(|row| row.iter().zip(&grid.y).map(|(x, y)| x + y).collect()).collect();
    Ok(PdeSolution::new(which, horizon, spec, &grid, values, drift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::spec::{FkSign, LambdaFn};

    fn constant(lam: f64) -> SvSpec {
        SvSpec { lambda: LambdaFn::Constant(lam), ..SvSpec::default() }
    }

    #[test]
    fn terminal_slices_are_exact() {
        let s = SvSpec::default();
        let f = solve_linear_f(&s, s.t).unwrap();
        assert_eq!(f.which, Which::F);
        assert!(f.terminal().iter().all(|&v| v == 1.0));
        let g = compute_g(&s, &f).unwrap();
        assert!(g.pde.terminal().iter().all(|&v| v == 0.0));
        assert!(g.central.terminal().iter().all(|&v| v == 0.0));
        let p = solve_quasilinear_p(&s, &f, s.t).unwrap();
        assert_eq!(p.terminal(), &f.grid.y[..]);
        assert!(f.warnings.is_empty());
    }

    #[test]
    fn constant_lambda_closed_forms() {
        for lam in [0.1, 0.5, 1.0] {
            let s = constant(lam);
            let f = solve_linear_f(&s, s.t).unwrap();
            let p = solve_quasilinear_p(&s, &f, s.t).unwrap();
            let a = s.a();
            for k in 0..f.levels() {
                let tau = s.t - f.time(k);
                let fe = (-a * lam * lam * tau / 2.0).exp();
                let pe = (0.5 * a - s.rho * lam) * tau;
                for (j, &y) in f.grid.y.iter().enumerate() {
                    assert!((f.level(k)[j] - fe).abs() < 1e-8);
                    assert!((p.level(k)[j] - y - pe).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn comparison_bounds_hold() {
        for sign in [FkSign::PaperPde, FkSign::PaperFk] {
            let s = SvSpec { fk_sign: sign, ..SvSpec::default() };
            let f = solve_linear_f(&s, s.t_bar).unwrap();
            assert_eq!(f.which, Which::FBar);
            let sg = sign.factor();
            for k in 0..f.levels() {
                let tau = s.t_bar - f.time(k);
                let e1 = (-sg * s.a() * s.eps * s.eps * tau / 2.0).exp();
                let e2 = (-sg * s.a() * s.m * s.m * tau / 2.0).exp();
                let (lo, hi) = (e1.min(e2), e1.max(e2));
                for v in f.level(k) {
                    assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn g_matches_differentiated_f() {
        let s = SvSpec::default();
        let f = solve_linear_f(&s, s.t_bar).unwrap();
        let g = compute_g(&s, &f).unwrap();
        let scale = 10.0 * (f.grid.dy * f.grid.dy + f.grid.dt);
        let window: Vec<usize> = (0..f.grid.n_y()).filter(|&j| f.grid.y[j].abs() <= 3.0).collect();
        for k in 0..f.levels() {
            for &j in &window {
                assert!((g.pde.level(k)[j] - g.central.level(k)[j]).abs() <= scale);
            }
        }
    }

    #[test]
    fn horizon_monotonicity_follows_the_sign() {
        for sign in [FkSign::PaperPde, FkSign::PaperFk] {
            let s = SvSpec { fk_sign: sign, ..SvSpec::default() };
            let f = solve_linear_f(&s, s.t).unwrap();
            let fb = solve_linear_f(&s, s.t_bar).unwrap();
            for k in 0..f.levels() {
                for (x, y) in f.level(k).iter().zip(fb.level(k)) {
                    match sign {
                        FkSign::PaperPde => assert!(y <= x),
                        FkSign::PaperFk => assert!(y >= x),
                    }
                }
            }
        }
    }

    #[test]
    fn transform_and_lagged_solvers_agree() {
        let s = SvSpec::default();
        let fb = solve_linear_f(&s, s.t_bar).unwrap();
        let p = solve_quasilinear_p(&s, &fb, s.t).unwrap();
        let q = solve_quasilinear_p_lagged(&s, &fb, s.t).unwrap();
        let gap = (0..p.levels())
            .flat_map(|k| p.level(k).iter().zip(q.level(k)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-6, "{gap}");
    }

    #[test]
    fn interpolation_and_rows() {
        let s = SvSpec { n_y: 41, steps_per_unit: 40, ..SvSpec::default() };
        let f = solve_linear_f(&s, s.t).unwrap();
        assert!((f.at(0.5, 0.123).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.at(0.51, 0.0).is_err());
        assert!(f.at(0.0, 7.0).is_err());
        assert_eq!(f.long_rows().count(), 41 * 21);
        assert!(solve_linear_f(&s, 0.0).is_err());
    }

    #[test]
    fn rannacher_start_is_close_to_plain_crank_nicolson() {
        let s = SvSpec::default();
        let r = SvSpec { rannacher: true, ..s.clone() };
        let f = solve_linear_f(&s, s.t).unwrap();
        let g = solve_linear_f(&r, r.t).unwrap();
        for (x, y) in f.level(0).iter().zip(g.level(0)) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
