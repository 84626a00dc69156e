use serde::{Deserialize, Serialize};

use crate::error::{MirmError, Result};

/// A coefficient given as one value for all steps or one value per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Scalar(f64),
    PerStep(Vec<f64>),
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Scalar(0.0)
    }
}

impl Coefficient {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            Coefficient::Scalar(v) => *v,
            Coefficient::PerStep(v) => v[step],
        }
    }

    fn check(&self, name: &str, n_steps: usize) -> Result<()> {
        match self {
            Coefficient::Scalar(v) if !v.is_finite() => {
                Err(MirmError::InvalidInput(format!("{name} must be finite")))
            }
            Coefficient::PerStep(v) if v.len() != n_steps => Err(MirmError::InvalidInput(format!(
                "{name} has {} entries, expected one per step ({n_steps})",
                v.len()
            ))),
            Coefficient::PerStep(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(MirmError::InvalidInput(format!("{name} must be finite")))
            }
            _ => Ok(()),
        }
    }

    fn values(&self, n_steps: usize) -> Vec<f64> {
        (0..n_steps).map(|k| self.at(k)).collect()
    }
}

/// One traded asset driven by `W¹`, a second Brownian motion `W²`, and the
/// coefficients of the benchmark `Y` and the density process `Z`.
///
/// Coefficients are piecewise constant on the grid `k·dt`. The asset drift
/// is `λσ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub gamma: f64,
    pub lambda: Coefficient,
    #[serde(default)]
    pub delta: Coefficient,
    #[serde(default)]
    pub phi: Coefficient,
    pub sigma: Coefficient,
    pub n_steps: usize,
    pub dt: f64,
}

impl CoefficientSpec {
    /// Constant market price of risk `λ` and volatility `σ`, no benchmark and
    /// no change of measure.
    pub fn constant(gamma: f64, lambda: f64, sigma: f64, n_steps: usize, dt: f64) -> Self {
        Self {
            gamma,
            lambda: Coefficient::Scalar(lambda),
            delta: Coefficient::Scalar(0.0),
            phi: Coefficient::Scalar(0.0),
            sigma: Coefficient::Scalar(sigma),
            n_steps,
            dt,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(MirmError::InvalidInput(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_steps == 0 || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MirmError::InvalidInput("need n_steps >= 1 and dt > 0".into()));
        }
        for (name, c) in [("lambda", &self.lambda), ("delta", &self.delta), ("phi", &self.phi), ("sigma", &self.sigma)] {
            c.check(name, self.n_steps)?;
        }
        if (0..self.n_steps).any(|k| !(self.sigma.at(k) > 0.0)) {
            return Err(MirmError::InvalidInput("sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.lambda.values(self.n_steps)
    }

    /// Whether `δ` and `φ` vanish on every step.
    pub fn is_plain(&self) -> bool {
        (0..self.n_steps).all(|k| self.delta.at(k) == 0.0 && self.phi.at(k) == 0.0)
    }

    /// The same market seen under the measure with density `Z`: the price
    /// of risk becomes `λ + φ` and `φ` is removed.
    pub fn under_density(&self) -> Self {
        let lp: Vec<f64> = (0..self.n_steps).map(|k| self.lambda.at(k) + self.phi.at(k)).collect();
        Self {
            lambda: Coefficient::PerStep(lp),
            phi: Coefficient::Scalar(0.0),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_array_entries_parse() {
        let s = CoefficientSpec::from_json(
            r#"{"gamma":1,"lambda":[0.1,0.2],"sigma":0.3,"n_steps":2,"dt":0.5}"#,
        )
        .unwrap();
        assert_eq!(s.lambda.at(1), 0.2);
        assert_eq!(s.delta.at(0), 0.0);
        assert!(s.is_plain());
        assert_eq!(s.horizon(), 1.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(CoefficientSpec::from_json(r#"{"gamma":1,"lambda":[0.1],"sigma":0.3,"n_steps":2,"dt":0.5}"#).is_err());
        assert!(CoefficientSpec::from_json(r#"{"gamma":0,"lambda":0.1,"sigma":0.3,"n_steps":2,"dt":0.5}"#).is_err());
        assert!(CoefficientSpec::from_json(r#"{"gamma":1,"lambda":0.1,"sigma":0,"n_steps":2,"dt":0.5}"#).is_err());
    }

    #[test]
    fn density_shift_moves_phi_into_lambda() {
        let mut s = CoefficientSpec::constant(1.0, 0.2, 0.3, 4, 0.25);
        s.phi = Coefficient::Scalar(0.1);
        let t = s.under_density();
        assert!((t.lambda.at(3) - 0.3).abs() < 1e-15);
        assert!(t.is_plain());
    }
}
