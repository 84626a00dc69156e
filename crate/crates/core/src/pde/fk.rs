use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MirmError, Result};
use crate::numeric::{item_rng, mean_and_se};
use crate::pde::spec::SvSpec;

/// Euler steps per unit time for the factor paths.
pub const FK_STEPS_PER_UNIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FkKind {
    /// `f` with horizon `T`.
    F,
    /// `f̄` with horizon `T̄`.
    FBar,
    /// `ḡ = f̄_y`.
    GBar,
}

impl FkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FkKind::F => "f",
            FkKind::FBar => "f_bar",
            FkKind::GBar => "g_bar",
        }
    }
}

impl fmt::Display for FkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FkKind {
    type Err = MirmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(FkKind::F),
            "f_bar" => Ok(FkKind::FBar),
            "g_bar" => Ok(FkKind::GBar),
            _ => Err(MirmError::InvalidInput(format!("unknown kind `{s}` (f|f_bar|g_bar)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkEstimate {
    pub kind: FkKind,
    pub t: f64,
    pub y: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub steps: usize,
}

/// Monte Carlo value of `f`, `f̄` or `f̄_y` at `(t, y)` from Euler paths of
/// `dY = -ρλ(Y)ds + dB`.
///
/// `f = E[exp(-∫ s·½(1-ρ²)λ²(Y) ds)]`. The derivative uses the pathwise
/// tangent `J = ∂Y/∂y`, `dJ = -ρλ'(Y) J ds`, which gives
/// `f_y = -E[e^{-I} ∫ s·(1-ρ²)λλ'(Y) J ds]`.
pub fn fk_oracle(spec: &SvSpec, kind: FkKind, t: f64, y: f64, n_paths: usize, seed: u64) -> Result<FkEstimate> {
    fk_oracle_with_steps(spec, kind, t, y, n_paths, seed, FK_STEPS_PER_UNIT)
}

pub fn fk_oracle_with_steps(
    spec: &SvSpec,
    kind: FkKind,
    t: f64,
    y: f64,
    n_paths: usize,
    seed: u64,
    steps_per_unit: usize,
) -> Result<FkEstimate> {
    spec.validate()?;
    let horizon = match kind {
        FkKind::F => spec.t,
        FkKind::FBar | FkKind::GBar => spec.t_bar,
    };
    if !(t >= 0.0 && t <= horizon && y.is_finite()) {
        return Err(MirmError::InvalidInput(format!("(t, y) = ({t}, {y}) is outside [0, {horizon}] x R")));
    }
    if n_paths < 2 || steps_per_unit == 0 {
        return Err(MirmError::InvalidInput("need at least two paths and one step per unit".into()));
    }
    let steps = ((horizon - t) * steps_per_unit as f64).ceil() as usize;
    let dt = if steps > 0 { (horizon - t) / steps as f64 } else { 0.0 };
    let sq = dt.sqrt();
    let s = spec.fk_sign.factor();
    let a = spec.a();
    let rate = |x: f64| spec.decay(x);
    let rate_y = |x: f64| s * a * spec.lambda(x) * spec.lambda_prime(x);
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i as u64);
            let (mut x, mut j, mut int, mut dint) = (y, 1.0f64, 0.0f64, 0.0f64);
            let (mut r0, mut d0) = (rate(x), rate_y(x));
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                let xn = x - spec.rho * spec.lambda(x) * dt + sq * z;
                let jn = j * (1.0 - spec.rho * spec.lambda_prime(x) * dt);
                let (r1, d1) = (rate(xn), rate_y(xn));
                int += 0.5 * (r0 + r1) * dt;
                dint += 0.5 * (d0 * j + d1 * jn) * dt;
                (x, j, r0, d0) = (xn, jn, r1, d1);
            }
            match kind {
                FkKind::F | FkKind::FBar => (-int).exp(),
                FkKind::GBar => -(-int).exp() * dint,
            }
        })
        .collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(FkEstimate { kind, t, y, value, std_error, n_paths, seed, steps })
}
