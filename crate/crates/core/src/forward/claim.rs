use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MirmError, Result};

/// One simulated trajectory on the time grid `k·dt`, `k = 0..=n`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub dt: f64,
    pub w1: &'a [f64],
    pub w2: &'a [f64],
    pub s: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub a: &'a [f64],
}

impl PathView<'_> {
    pub fn steps(&self) -> usize {
        self.s.len() - 1
    }

    /// Grid index of time `t`; fails if `t` is not on the grid.
    pub fn index(&self, t: f64) -> Result<usize> {
        grid_index(t, self.dt, self.steps())
    }
}

/// Grid index of `t` on `{k·dt : k = 0..=n}` with a relative tolerance.
pub fn grid_index(t: f64, dt: f64, n: usize) -> Result<usize> {
    let k = (t / dt).round();
    if !(t >= 0.0) || (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) || k as usize > n {
        return Err(MirmError::Structural(format!(
            "time {t} is not on the simulation grid (dt = {dt}, {n} steps)"
        )));
    }
    Ok(k as usize)
}

type PayoffFn = dyn Fn(&PathView) -> f64 + Send + Sync;

/// A path functional with a declared maturity. The payoff must only look at
/// the path up to the maturity.
#[derive(Clone)]
pub struct PathClaim {
    maturity: f64,
    payoff: Arc<PayoffFn>,
}

impl PathClaim {
    pub fn new<F>(maturity: f64, payoff: F) -> Self
    where
        F: Fn(&PathView) -> f64 + Send + Sync + 'static,
    {
        Self { maturity, payoff: Arc::new(payoff) }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(0.0, move |_| value)
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Payoff on one path; non-finite values are rejected.
    pub fn eval(&self, path: &PathView) -> Result<f64> {
        let v = (self.payoff)(path);
        if !v.is_finite() {
            return Err(MirmError::InvalidInput(format!("claim produced a non-finite payoff {v}")));
        }
        Ok(v)
    }
}

impl fmt::Debug for PathClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathClaim").field("maturity", &self.maturity).finish_non_exhaustive()
    }
}

/// Claim file for the forward engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathClaimSpec {
    Constant { value: f64 },
    /// `min(max(S_T - strike, 0), cap)`.
    CappedCall { maturity: f64, strike: f64, cap: f64 },
    /// `1` when `W²_T > level`, else `0`.
    FactorDigital { maturity: f64, level: f64 },
    /// `a·tanh(W²_T) + b·min(S_T, 2)`.
    Mixed { maturity: f64, a: f64, b: f64 },
}

impl PathClaimSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<PathClaim> {
        let bad = |m: f64| !(m >= 0.0 && m.is_finite());
        Ok(match *self {
            PathClaimSpec::Constant { value } => PathClaim::constant(value),
            PathClaimSpec::CappedCall { maturity, strike, cap } => {
                if bad(maturity) || !(cap >= 0.0) {
                    return Err(MirmError::InvalidInput("capped call needs maturity >= 0 and cap >= 0".into()));
                }
                PathClaim::new(maturity, move |p| {
                    let k = p.index(maturity).unwrap_or(p.steps());
                    (p.s[k] - strike).clamp(0.0, cap)
                })
            }
            PathClaimSpec::FactorDigital { maturity, level } => {
                if bad(maturity) {
                    return Err(MirmError::InvalidInput("maturity must be >= 0".into()));
                }
                PathClaim::new(maturity, move |p| {
                    let k = p.index(maturity).unwrap_or(p.steps());
                    if p.w2[k] > level { 1.0 } else { 0.0 }
                })
            }
            PathClaimSpec::Mixed { maturity, a, b } => {
                if bad(maturity) {
                    return Err(MirmError::InvalidInput("maturity must be >= 0".into()));
                }
                PathClaim::new(maturity, move |p| {
                    let k = p.index(maturity).unwrap_or(p.steps());
                    a * p.w2[k].tanh() + b * p.s[k].min(2.0)
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lookup() {
        assert_eq!(grid_index(0.5, 0.05, 20).unwrap(), 10);
        assert_eq!(grid_index(1.0, 0.05, 20).unwrap(), 20);
        assert!(grid_index(0.51, 0.05, 20).is_err());
        assert!(grid_index(1.05, 0.05, 20).is_err());
        assert!(grid_index(-0.05, 0.05, 20).is_err());
    }

    #[test]
    fn non_finite_payoffs_are_errors() {
        let c = PathClaim::new(0.0, |_| f64::INFINITY);
        let one = [1.0];
        let v = PathView { dt: 0.1, w1: &one, w2: &one, s: &one, y: &one, z: &one, a: &one };
        assert!(c.eval(&v).is_err());
        assert_eq!(PathClaim::constant(2.0).eval(&v).unwrap(), 2.0);
    }

    #[test]
    fn claim_files_build() {
        let c = PathClaimSpec::from_json(r#"{"kind":"capped_call","maturity":0.1,"strike":1.0,"cap":0.5}"#)
            .unwrap()
            .build()
            .unwrap();
        let w = [0.0, 0.3];
        let s = [1.0, 1.2];
        let v = PathView { dt: 0.1, w1: &w, w2: &w, s: &s, y: &s, z: &s, a: &w };
        assert!((c.eval(&v).unwrap() - 0.2).abs() < 1e-15);
        let d = PathClaimSpec::FactorDigital { maturity: 0.1, level: 0.2 }.build().unwrap();
        assert_eq!(d.eval(&v).unwrap(), 1.0);
        assert!(PathClaimSpec::from_json(r#"{"kind":"other"}"#).is_err());
        assert!(PathClaimSpec::Mixed { maturity: -1.0, a: 1.0, b: 1.0 }.build().is_err());
    }
}
