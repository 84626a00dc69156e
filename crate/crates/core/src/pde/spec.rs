use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MirmError, Result};

/// Sign of the zeroth-order term in the `f` equation.
///
/// `PaperPde` is `f_t + ½f_yy - ρλf_y - ½(1-ρ²)λ²f = 0`,
/// so `f` decays. `PaperFk` flips that term, giving the Feynman-Kac weight
/// `exp(+∫½(1-ρ²)λ² ds)` and a growing `f`; `g` and the `p` drifts follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkSign {
    #[default]
    PaperPde,
    PaperFk,
}

impl FkSign {
    /// `+1` for decay, `-1` for growth.
    pub fn factor(self) -> f64 {
        match self {
            FkSign::PaperPde => 1.0,
            FkSign::PaperFk => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FkSign::PaperPde => "paper_pde",
            FkSign::PaperFk => "paper_fk",
        }
    }
}

impl fmt::Display for FkSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FkSign {
    type Err = MirmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_pde" => Ok(FkSign::PaperPde),
            "paper_fk" => Ok(FkSign::PaperFk),
            _ => Err(MirmError::InvalidInput(format!("unknown fk_sign `{s}` (paper_pde|paper_fk)"))),
        }
    }
}

/// Market price of risk as a function of the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaFn {
    /// `ε + (M - ε) / (1 + e^{-y})`.
    Sigmoid,
    /// Constant override used for closed-form checks.
    Constant(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaField {
    Name(String),
    Value(f64),
}

impl Serialize for LambdaFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaFn::Sigmoid => LambdaField::Name("sigmoid".into()),
            LambdaFn::Constant(v) => LambdaField::Value(*v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LambdaFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match LambdaField::deserialize(d)? {
            LambdaField::Name(n) if n == "sigmoid" => Ok(LambdaFn::Sigmoid),
            LambdaField::Name(n) => Err(serde::de::Error::custom(format!("unknown lambda `{n}`"))),
            LambdaField::Value(v) => Ok(LambdaFn::Constant(v)),
        }
    }
}

fn default_theta() -> f64 {
    0.5
}

/// Stochastic-volatility example: one asset, a factor `dY = dB`, correlation
/// `ρ` and claim `-B_T`, solved on `[-L, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvSpec {
    pub rho: f64,
    pub eps: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda: LambdaFn,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_bar")]
    pub t_bar: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub n_y: usize,
    pub steps_per_unit: usize,
    #[serde(default)]
    pub fk_sign: FkSign,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Two implicit half-steps before the θ-scheme.
    #[serde(default)]
    pub rannacher: bool,
}

impl Default for SvSpec {
    fn default() -> Self {
        Self {
            rho: 0.5,
            eps: 0.1,
            m: 1.0,
            lambda: LambdaFn::Sigmoid,
            t: 0.5,
            t_bar: 1.0,
            l: 6.0,
            n_y: 401,
            steps_per_unit: 800,
            fk_sign: FkSign::PaperPde,
            theta: 0.5,
            rannacher: false,
        }
    }
}

impl SvSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MirmError::InvalidInput(m.to_string()));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.eps > 0.0 && self.eps < self.m && self.m.is_finite()) {
            return bad("need 0 < eps < M < inf");
        }
        if let LambdaFn::Constant(v) = self.lambda {
            if !v.is_finite() {
                return bad("constant lambda must be finite");
            }
        }
        if !(self.t > 0.0 && self.t_bar >= self.t && self.t_bar.is_finite()) {
            return bad("need 0 < T <= T_bar");
        }
        if !(self.l > 0.0 && self.l.is_finite()) || self.n_y < 3 || self.steps_per_unit == 0 {
            return bad("need L > 0, n_y >= 3, steps_per_unit >= 1");
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return bad("theta must lie in [1/2, 1]");
        }
        for h in [self.t, self.t_bar] {
            let n = h * self.steps_per_unit as f64;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return bad("T and T_bar must be multiples of 1/steps_per_unit");
            }
        }
        let g = self.grid();
        if let LambdaFn::Sigmoid = self.lambda {
            let lam: Vec<f64> = g.y.iter().map(|&y| self.lambda(y)).collect();
            if lam.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(MirmError::Model("lambda is not strictly increasing on the grid".into()));
            }
            if lam.iter().any(|&v| !(v > self.eps && v < self.m)) {
                return Err(MirmError::Model("lambda leaves (eps, M) on the grid".into()));
            }
        }
        Ok(())
    }

    pub fn lambda(&self, y: f64) -> f64 {
        match self.lambda {
            LambdaFn::Sigmoid => self.eps + (self.m - self.eps) / (1.0 + (-y).exp()),
            LambdaFn::Constant(v) => v,
        }
    }

    pub fn lambda_prime(&self, y: f64) -> f64 {
        match self.lambda {
            LambdaFn::Sigmoid => {
                let s = 1.0 / (1.0 + (-y).exp());
                (self.m - self.eps) * s * (1.0 - s)
            }
            LambdaFn::Constant(_) => 0.0,
        }
    }

    /// `1 - ρ²`.
    pub fn a(&self) -> f64 {
        1.0 - self.rho * self.rho
    }

    /// Zeroth-order coefficient `s·½(1-ρ²)λ²` of the `f` equation.
    pub fn decay(&self, y: f64) -> f64 {
        let l = self.lambda(y);
        self.fk_sign.factor() * 0.5 * self.a() * l * l
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.l, self.n_y, self.steps_per_unit)
    }

    /// Same model on a grid with twice the resolution in `y` and `t`.
    pub fn refined(&self) -> Self {
        Self { n_y: 2 * self.n_y - 1, steps_per_unit: 2 * self.steps_per_unit, ..self.clone() }
    }
}

/// Uniform grid on `[-L, L]` with `n_y` points and a fixed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub l: f64,
    pub y: Vec<f64>,
    pub dy: f64,
    pub dt: f64,
}

impl Grid1D {
    pub fn new(l: f64, n_y: usize, steps_per_unit: usize) -> Self {
        let dy = 2.0 * l / (n_y - 1) as f64;
        let y = (0..n_y).map(|j| -l + j as f64 * dy).collect();
        Self { l, y, dy, dt: 1.0 / steps_per_unit as f64 }
    }

    pub fn n_y(&self) -> usize {
        self.y.len()
    }

    pub fn steps(&self, horizon: f64) -> usize {
        (horizon / self.dt).round() as usize
    }

    /// Warnings for drifts that make the central scheme non-monotone.
    pub fn warnings(&self, max_drift: f64) -> Vec<String> {
        let mut w = Vec::new();
        if max_drift * self.dy > 1.0 {
            w.push(format!("cell Peclet number {:.3} exceeds 1", max_drift * self.dy));
        }
        if self.dt * max_drift / self.dy > 1.0 {
            w.push(format!("dt * drift / dy = {:.3} exceeds 1", self.dt * max_drift / self.dy));
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_file_round_trip() {
        let s = SvSpec::from_json(
            r#"{"rho":0.5,"eps":0.1,"M":1.0,"lambda":"sigmoid","T":0.5,"T_bar":1.0,"L":6,"n_y":401,"steps_per_unit":800,"fk_sign":"paper_fk"}"#,
        )
        .unwrap();
        assert_eq!(s.fk_sign, FkSign::PaperFk);
        assert_eq!(s.lambda, LambdaFn::Sigmoid);
        let back = SvSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let c = SvSpec::from_json(
            r#"{"rho":0.5,"eps":0.1,"M":1.0,"lambda":0.4,"T":0.5,"T_bar":1.0,"L":6,"n_y":41,"steps_per_unit":80}"#,
        )
        .unwrap();
        assert_eq!(c.lambda, LambdaFn::Constant(0.4));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = SvSpec::default();
        for bad in [
            SvSpec { rho: 1.0, ..ok.clone() },
            SvSpec { eps: 1.5, ..ok.clone() },
            SvSpec { t_bar: 0.25, ..ok.clone() },
            SvSpec { n_y: 2, ..ok.clone() },
            SvSpec { steps_per_unit: 3, ..ok.clone() },
            SvSpec { theta: 0.2, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(ok.validate().is_ok());
        assert!("other".parse::<FkSign>().is_err());
    }

    #[test]
    fn sigmoid_has_the_stated_range_and_slope() {
        let s = SvSpec::default();
        assert!((s.lambda(0.0) - 0.55).abs() < 1e-15);
        let h = 1e-6;
        for y in [-3.0, 0.0, 2.0] {
            let fd = (s.lambda(y + h) - s.lambda(y - h)) / (2.0 * h);
            assert!((fd - s.lambda_prime(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_spacing() {
        let g = SvSpec::default().grid();
        assert_eq!(g.n_y(), 401);
        assert!((g.dy - 0.03).abs() < 1e-15);
        assert_eq!(g.steps(0.5), 400);
        assert!(g.warnings(1.0).is_empty());
        assert_eq!(g.warnings(100.0).len(), 2);
    }
}
