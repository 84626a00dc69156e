//! Relative entropy of martingale measures against the physical law,
//! restricted to the atoms of one depth.

use std::fmt;
use std::str::FromStr;

use crate::error::{MirmError, Result};
use crate::finite::family::MartingaleMeasureFamily;
use crate::finite::market::FiniteTreeMarket;
use crate::finite::optimize::{maximize_over_family, SearchOptions};
use crate::numeric::xlogx_ratio;

/// Which functional of `(Q, P)` is used on the atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyConvention {
    /// `Σ Q ln(Q / P)` at every level.
    #[default]
    Standard,
    /// `Σ (Q / P) ln(Q / P)` on the terminal atoms, without probability
    /// weights. Coarser levels keep the standard form. Kept for comparison
    /// only: this is not a relative entropy.
    PrintedRatio,
}

impl EntropyConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyConvention::Standard => "standard",
            EntropyConvention::PrintedRatio => "printed_ratio",
        }
    }
}

impl fmt::Display for EntropyConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntropyConvention {
    type Err = MirmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(EntropyConvention::Standard),
            "printed_ratio" => Ok(EntropyConvention::PrintedRatio),
            _ => Err(MirmError::InvalidInput(format!("unknown entropy convention {s:?}"))),
        }
    }
}

fn entropy_of(q: &[f64], p: &[f64], ratio: bool) -> f64 {
    q.iter()
        .zip(p)
        .map(|(&q, &p)| if ratio { xlogx_ratio(q / p, 1.0) } else { xlogx_ratio(q, p) })
        .sum()
}

/// `H(Q^θ | P)` on the depth-`level` atoms.
///
/// Points on the boundary of the family are accepted; atoms with zero
/// martingale weight contribute nothing.
pub fn relative_entropy(
    market: &FiniteTreeMarket,
    family: &MartingaleMeasureFamily,
    theta: &[f64],
    level: usize,
) -> Result<f64> {
    if level > market.depth() {
        return Err(MirmError::Structural(format!("level {level} exceeds tree depth {}", market.depth())));
    }
    family.check_closure(theta)?;
    Ok(entropy_of(&family.atom_probs(theta, level), &market.atom_probs(level), false))
}

/// Entropy as a function of the family parameter at a fixed level, with its
/// infimum over the closed domain.
#[derive(Debug, Clone)]
pub struct EntropyCurve {
    level: usize,
    convention: EntropyConvention,
    family: MartingaleMeasureFamily,
    phys: Vec<f64>,
    terminal: usize,
    inf_value: f64,
    argmin: Vec<f64>,
}

impl EntropyCurve {
    pub fn new(
        market: &FiniteTreeMarket,
        family: &MartingaleMeasureFamily,
        level: usize,
        convention: EntropyConvention,
    ) -> Result<Self> {
        if level > market.depth() {
            return Err(MirmError::Structural(format!("level {level} exceeds tree depth {}", market.depth())));
        }
        let mut curve = Self {
            level,
            convention,
            family: family.clone(),
            phys: market.atom_probs(level),
            terminal: market.depth(),
            inf_value: 0.0,
            argmin: Vec::new(),
        };
        let min = maximize_over_family(family, |th| -curve.raw_unchecked(th), &SearchOptions::default())?;
        curve.inf_value = -min.value;
        curve.argmin = min.arg;
        Ok(curve)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn convention(&self) -> EntropyConvention {
        self.convention
    }

    pub fn inf_value(&self) -> f64 {
        self.inf_value
    }

    pub fn argmin(&self) -> &[f64] {
        &self.argmin
    }

    fn ratio_form(&self) -> bool {
        self.convention == EntropyConvention::PrintedRatio && self.level == self.terminal
    }

    pub(crate) fn raw_unchecked(&self, theta: &[f64]) -> f64 {
        entropy_of(&self.family.atom_probs(theta, self.level), &self.phys, self.ratio_form())
    }

    pub fn raw(&self, theta: &[f64]) -> Result<f64> {
        self.family.check_closure(theta)?;
        Ok(self.raw_unchecked(theta))
    }

    /// Raw entropy minus its infimum; nonnegative up to rounding.
    pub fn normalized(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.raw(theta)? - self.inf_value)
    }

    pub(crate) fn normalized_unchecked(&self, theta: &[f64]) -> f64 {
        self.raw_unchecked(theta) - self.inf_value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // h̄₂ at ν = 0 and the infimum of h̄₂, computed independently in
    // extended precision.
    const H2_AT_ZERO: f64 = 0.019630505942730577;
    const H2_INF: f64 = 0.019533853897026118;
    const H2_ARGMIN: f64 = 0.003287647995254048;

    fn setup() -> (FiniteTreeMarket, MartingaleMeasureFamily) {
        let m = FiniteTreeMarket::example();
        let f = MartingaleMeasureFamily::new(&m).unwrap();
        (m, f)
    }

    #[test]
    fn level_one_entropy_vanishes_at_zero() {
        let (m, f) = setup();
        assert!(relative_entropy(&m, &f, &[0.0], 1).unwrap().abs() < 1e-16);
    }

    #[test]
    fn level_two_entropy_at_zero() {
        let (m, f) = setup();
        let h = relative_entropy(&m, &f, &[0.0], 2).unwrap();
        assert!((h - H2_AT_ZERO).abs() < 1e-15);
        assert!((h - (9.0f64 / 8.0).ln() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_limit_is_finite() {
        let (m, f) = setup();
        let h = relative_entropy(&m, &f, &[1.0 / 3.0], 2).unwrap();
        // Q = (0, 1, 0, 0) against P[ω₂] = 1/3
        assert!((h - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn outside_points_are_rejected() {
        let (m, f) = setup();
        assert!(matches!(relative_entropy(&m, &f, &[-0.2], 2), Err(MirmError::Domain(_))));
    }

    #[test]
    fn curve_infimum_matches_fixture() {
        let (m, f) = setup();
        let c = EntropyCurve::new(&m, &f, 2, EntropyConvention::Standard).unwrap();
        assert!((c.inf_value() - H2_INF).abs() < 1e-13);
        assert!((c.argmin()[0] - H2_ARGMIN).abs() < 1e-6);
        let c1 = EntropyCurve::new(&m, &f, 1, EntropyConvention::Standard).unwrap();
        assert!(c1.inf_value().abs() < 1e-15);
        assert!(c1.argmin()[0].abs() < 1e-6);
    }

    #[test]
    fn normalized_curves_are_nonnegative_with_zero_infimum() {
        let (m, f) = setup();
        for level in [1, 2] {
            let c = EntropyCurve::new(&m, &f, level, EntropyConvention::Standard).unwrap();
            let (lo, hi) = f.interval_1d().unwrap();
            let mut min = f64::INFINITY;
            for k in 0..=100_000 {
                let nu = lo + (hi - lo) * k as f64 / 100_000.0;
                let v = c.normalized(&[nu]).unwrap();
                assert!(v >= -1e-15);
                min = min.min(v);
            }
            assert!(min < 1e-10, "level {level}: {min}");
        }
    }

    #[test]
    fn curves_are_convex_and_ordered() {
        let (m, f) = setup();
        let c1 = EntropyCurve::new(&m, &f, 1, EntropyConvention::Standard).unwrap();
        let c2 = EntropyCurve::new(&m, &f, 2, EntropyConvention::Standard).unwrap();
        let (lo, hi) = f.interval_1d().unwrap();
        let n = 2000;
        let x = |k: usize| lo + (hi - lo) * k as f64 / n as f64;
        for k in 1..n {
            for c in [&c1, &c2] {
                let mid = c.raw(&[x(k)]).unwrap();
                let chord = 0.5 * (c.raw(&[x(k - 1)]).unwrap() + c.raw(&[x(k + 1)]).unwrap());
                assert!(mid <= chord + 1e-15);
            }
            assert!(c1.raw(&[x(k)]).unwrap() <= c2.raw(&[x(k)]).unwrap() + 1e-15);
        }
    }

    #[test]
    fn printed_ratio_differs_from_standard() {
        let (m, f) = setup();
        let s = EntropyCurve::new(&m, &f, 2, EntropyConvention::Standard).unwrap();
        let r = EntropyCurve::new(&m, &f, 2, EntropyConvention::PrintedRatio).unwrap();
        // ratios at ν = 0 are (1, 1, 3/2, 3/4)
        let want = 1.5f64 * 1.5f64.ln() + 0.75 * 0.75f64.ln();
        let got = r.raw(&[0.0]).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        assert!((s.raw(&[0.0]).unwrap() - got).abs() > 0.1);
        let r1 = EntropyCurve::new(&m, &f, 1, EntropyConvention::PrintedRatio).unwrap();
        assert_eq!(r1.raw(&[0.1]).unwrap(), relative_entropy(&m, &f, &[0.1], 1).unwrap());
    }

    #[test]
    fn convention_parses() {
        assert_eq!("printed_ratio".parse::<EntropyConvention>().unwrap(), EntropyConvention::PrintedRatio);
        assert!("raw".parse::<EntropyConvention>().is_err());
    }
}
