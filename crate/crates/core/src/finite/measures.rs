//! Entropic, super-hedging and penalty risk measures on a finite tree.
//!
//! A claim evaluated at depth `t` is a depth-`t` random variable: the
//! entropic measure uses the relative entropy of the depth-`t` atoms and the
//! primal problem trades up to depth `t`.

use crate::error::{MirmError, Result};
use crate::finite::entropy::{EntropyConvention, EntropyCurve};
use crate::finite::family::MartingaleMeasureFamily;
use crate::finite::market::{price_tol, FiniteTreeMarket};
use crate::finite::optimize::{maximize_over_family, FamilyMax, SearchOptions};
use crate::numeric::min_log_sum_exp_linear;
use crate::risk::{InformationTree, NodeClaim, RiskEvaluator};

/// A market with its martingale family and cached entropy curves.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    market: FiniteTreeMarket,
    family: MartingaleMeasureFamily,
    curves: Vec<EntropyCurve>,
    search: SearchOptions,
}

/// Maximizer of a dual problem.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub value: f64,
    pub arg: Vec<f64>,
    pub evaluations: usize,
}

impl From<FamilyMax> for DualSolution {
    fn from(m: FamilyMax) -> Self {
        Self { value: m.value, arg: m.arg, evaluations: m.evaluations }
    }
}

impl FiniteModel {
    pub fn new(market: FiniteTreeMarket) -> Result<Self> {
        Self::with_convention(market, EntropyConvention::Standard)
    }

    pub fn with_convention(market: FiniteTreeMarket, convention: EntropyConvention) -> Result<Self> {
        let family = MartingaleMeasureFamily::new(&market)?;
        let curves = (0..=market.depth())
            .map(|t| EntropyCurve::new(&market, &family, t, convention))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { market, family, curves, search: SearchOptions::default() })
    }

    pub fn example() -> Self {
        Self::new(FiniteTreeMarket::example()).expect("example market is arbitrage free")
    }

    pub fn market(&self) -> &FiniteTreeMarket {
        &self.market
    }

    pub fn family(&self) -> &MartingaleMeasureFamily {
        &self.family
    }

    pub fn curve(&self, level: usize) -> &EntropyCurve {
        &self.curves[level]
    }

    pub fn convention(&self) -> EntropyConvention {
        self.curves[0].convention()
    }

    /// Payoff vector of `f` regarded as a depth-`t` random variable.
    fn at_depth(&self, f: &NodeClaim, t: usize) -> Result<Vec<f64>> {
        if t > self.market.depth() {
            return Err(MirmError::Structural(format!(
                "evaluation depth {t} exceeds tree depth {}",
                self.market.depth()
            )));
        }
        Ok(f.lift(&self.market, t)?.into_values())
    }

    /// `E_Q[g]` for a depth-`t` payoff vector.
    fn expectation(&self, theta: &[f64], values: &[f64], t: usize) -> f64 {
        self.family.atom_probs(theta, t).iter().zip(values).map(|(q, v)| q * v).sum()
    }

    fn check_gamma(gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(MirmError::InvalidInput(format!("risk aversion must be positive, got {gamma}")));
        }
        Ok(())
    }

    /// `sup_Q E_Q[-f] - (H_t(Q) - inf H_t) / γ` with its maximizer.
    pub fn entropic_rho_dual_solution(&self, f: &NodeClaim, t: usize, gamma: f64) -> Result<DualSolution> {
        Self::check_gamma(gamma)?;
        let v = self.at_depth(f, t)?;
        let curve = &self.curves[t];
        let m = maximize_over_family(
            &self.family,
            |th| -self.expectation(th, &v, t) - curve.normalized_unchecked(th) / gamma,
            &self.search,
        )?;
        Ok(m.into())
    }

    pub fn entropic_rho_dual(&self, f: &NodeClaim, t: usize, gamma: f64) -> Result<f64> {
        Ok(self.entropic_rho_dual_solution(f, t, gamma)?.value)
    }

    /// Exponential indifference value: `(1/γ)(ln V_f - ln V_0)` where
    /// `V_g = inf_α E[exp(-γ(g + Σ α ΔS))]` over strategies trading up to
    /// depth `t`.
    pub fn entropic_rho_primal(&self, f: &NodeClaim, t: usize, gamma: f64) -> Result<f64> {
        Self::check_gamma(gamma)?;
        let v = self.at_depth(f, t)?;
        let with = self.log_value(v.iter().map(|x| -gamma * x).collect(), t)?;
        let without = self.log_value(vec![0.0; v.len()], t)?;
        Ok((with - without) / gamma)
    }

    /// Backward induction of `ln inf_β Σ p_c exp(L_c - β ΔS_c)` from depth `t`
    /// to the root. `β` absorbs the risk aversion.
    fn log_value(&self, mut level: Vec<f64>, t: usize) -> Result<f64> {
        for d in (0..t).rev() {
            level = (0..self.market.width(d))
                .map(|i| {
                    let s0 = self.market.node(d, i).price;
                    let range = self.market.node(d, i).children.clone();
                    let kids = self.market.children(d, i);
                    let logs: Vec<f64> = range
                        .zip(kids)
                        .map(|(c, k)| level[c] + k.prob.ln())
                        .collect();
                    let moves: Vec<f64> = kids.iter().map(|k| k.price - s0).collect();
                    min_log_sum_exp_linear(&logs, &moves, price_tol(s0))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(level[0])
    }

    /// `sup_Q E_Q[-f]` over the closed family, by backward induction over
    /// the vertices of every node's conditional martingale polytope.
    pub fn superhedge_rho(&self, f: &NodeClaim, t: usize) -> Result<f64> {
        let mut level: Vec<f64> = self.at_depth(f, t)?.into_iter().map(|x| -x).collect();
        for d in (0..t).rev() {
            level = (0..self.market.width(d))
                .map(|i| {
                    let s0 = self.market.node(d, i).price;
                    let range = self.market.node(d, i).children.clone();
                    let prices: Vec<f64> = self.market.children(d, i).iter().map(|k| k.price).collect();
                    let vals = &level[range];
                    vertices(s0, &prices)
                        .into_iter()
                        .map(|q| q.iter().zip(vals).map(|(q, v)| q * v).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        Ok(level[0])
    }

    /// `sup_θ E_{Q^θ}[-f] - penalty(θ)` over the closed family. The penalty
    /// may be `+inf` on part of the domain but not everywhere.
    pub fn penalty_rho_solution<P>(&self, f: &NodeClaim, t: usize, penalty: P) -> Result<DualSolution>
    where
        P: Fn(&[f64]) -> f64,
    {
        let v = self.at_depth(f, t)?;
        let m = maximize_over_family(&self.family, |th| -self.expectation(th, &v, t) - penalty(th), &self.search)
            .map_err(|e| match e {
                MirmError::InvalidInput(_) => MirmError::InvalidInput("penalty is infinite on the whole domain".into()),
                other => other,
            })?;
        if !m.value.is_finite() {
            return Err(MirmError::InvalidInput("penalty is infinite on the whole domain".into()));
        }
        Ok(m.into())
    }

    pub fn penalty_rho<P>(&self, f: &NodeClaim, t: usize, penalty: P) -> Result<f64>
    where
        P: Fn(&[f64]) -> f64,
    {
        Ok(self.penalty_rho_solution(f, t, penalty)?.value)
    }

    /// `f_a`: pays `a` on the subtree of the last depth-one node, 0 elsewhere.
    pub fn indicator_claim(&self, a: f64) -> Result<NodeClaim> {
        if self.market.depth() < 1 {
            return Err(MirmError::Structural("tree has no depth-one nodes".into()));
        }
        let w = self.market.width(1);
        NodeClaim::new(1, (0..w).map(|i| if i + 1 == w { a } else { 0.0 }).collect())
    }
}

/// Extreme points of `{q >= 0 : Σ q = 1, Σ q s = s0}`.
fn vertices(s0: f64, prices: &[f64]) -> Vec<Vec<f64>> {
    let tol = price_tol(s0);
    let m = prices.len();
    let mut out = Vec::new();
    for i in 0..m {
        if (prices[i] - s0).abs() <= tol {
            let mut q = vec![0.0; m];
            q[i] = 1.0;
            out.push(q);
        }
    }
    for i in (0..m).filter(|&i| prices[i] < s0 - tol) {
        for j in (0..m).filter(|&j| prices[j] > s0 + tol) {
            let mut q = vec![0.0; m];
            q[i] = (prices[j] - s0) / (prices[j] - prices[i]);
            q[j] = 1.0 - q[i];
            out.push(q);
        }
    }
    out
}

/// The maturity-anchored entropic measure `ρ(f; t)` as a risk evaluator.
#[derive(Debug, Clone)]
pub struct ClassicalEntropic<'a> {
    pub model: &'a FiniteModel,
    pub gamma: f64,
}

impl RiskEvaluator for ClassicalEntropic<'_> {
    type Model = FiniteTreeMarket;

    fn model(&self) -> &FiniteTreeMarket {
        &self.model.market
    }

    fn eval(&self, claim: &NodeClaim, maturity: usize) -> Result<f64> {
        self.model.entropic_rho_dual(claim, maturity, self.gamma)
    }
}

/// Super-hedging price as a risk evaluator.
#[derive(Debug, Clone)]
pub struct SuperHedge<'a> {
    pub model: &'a FiniteModel,
}

impl RiskEvaluator for SuperHedge<'_> {
    type Model = FiniteTreeMarket;

    fn model(&self) -> &FiniteTreeMarket {
        &self.model.market
    }

    fn eval(&self, claim: &NodeClaim, maturity: usize) -> Result<f64> {
        self.model.superhedge_rho(claim, maturity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{axiom_check, earliest_maturity, Axiom, Holdings};
    use proptest::prelude::*;

    // Dense-grid dual values of ρ(f_1; t) for γ = 1, computed independently
    // in extended precision.
    const RHO1_A1: f64 = -0.3042355192504665;
    const RHO2_A1: f64 = -0.3007345076068369;

    #[test]
    fn zero_claim_has_zero_risk() {
        let m = FiniteModel::example();
        for t in 0..=2 {
            let z = NodeClaim::constant(m.market(), t, 0.0).unwrap();
            assert!(m.entropic_rho_dual(&z, t, 1.0).unwrap().abs() < 1e-10);
            assert!(m.entropic_rho_primal(&z, t, 1.0).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn dual_matches_fixtures_and_primal() {
        let m = FiniteModel::example();
        let f = m.indicator_claim(1.0).unwrap();
        let d1 = m.entropic_rho_dual(&f, 1, 1.0).unwrap();
        let d2 = m.entropic_rho_dual(&f, 2, 1.0).unwrap();
        assert!((d1 - RHO1_A1).abs() < 1e-9, "{d1}");
        assert!((d2 - RHO2_A1).abs() < 1e-9, "{d2}");
        assert!((m.entropic_rho_primal(&f, 1, 1.0).unwrap() - d1).abs() < 1e-9);
        assert!((m.entropic_rho_primal(&f, 2, 1.0).unwrap() - d2).abs() < 1e-9);
        assert!((d1 - d2).abs() > 1e-3);
    }

    #[test]
    fn constants_are_cash() {
        let m = FiniteModel::example();
        for t in 0..=2 {
            let c = NodeClaim::constant(m.market(), t, 0.7).unwrap();
            assert!((m.entropic_rho_dual(&c, t, 2.0).unwrap() + 0.7).abs() < 1e-10);
            assert!((m.entropic_rho_primal(&c, t, 2.0).unwrap() + 0.7).abs() < 1e-12);
            assert!((m.superhedge_rho(&c, t).unwrap() + 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn replicable_claim_is_worth_its_cash() {
        let m = FiniteModel::example();
        let gains = Holdings::new(vec![vec![0.3], vec![0.0, 0.0, -1.2]]).gains(m.market()).unwrap();
        let f = gains.map(|g| g + 0.25).unwrap();
        assert!((m.entropic_rho_primal(&f, 2, 1.0).unwrap() + 0.25).abs() < 1e-10);
        assert!((m.entropic_rho_dual(&f, 2, 1.0).unwrap() + 0.25).abs() < 1e-9);
    }

    #[test]
    fn superhedge_of_indicator() {
        let m = FiniteModel::example();
        let f = m.indicator_claim(1.0).unwrap();
        assert_eq!(m.superhedge_rho(&f, 2).unwrap(), 0.0);
        assert_eq!(m.superhedge_rho(&f, 1).unwrap(), 0.0);
        let g = m.indicator_claim(-1.0).unwrap();
        // ν = -1/6 puts weight 1/2 on the last branch
        assert!((m.superhedge_rho(&g, 2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn superhedge_matches_endpoint_enumeration() {
        let m = FiniteModel::example();
        let f = NodeClaim::new(2, vec![0.3, -1.0, 0.8, 0.1]).unwrap();
        let want = [-1.0 / 6.0, 1.0 / 3.0]
            .iter()
            .map(|&nu| -m.expectation(&[nu], f.values(), 2))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((m.superhedge_rho(&f, 2).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn zero_penalty_is_superhedging() {
        let m = FiniteModel::example();
        let f = NodeClaim::new(2, vec![0.3, -1.0, 0.8, 0.1]).unwrap();
        let p = m.penalty_rho(&f, 2, |_| 0.0).unwrap();
        assert!((p - m.superhedge_rho(&f, 2).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn entropy_penalty_is_dual_entropic() {
        let m = FiniteModel::example();
        let f = NodeClaim::new(2, vec![0.3, -1.0, 0.8, 0.1]).unwrap();
        let c = m.curve(2).clone();
        let p = m.penalty_rho(&f, 2, |th| c.normalized(th).unwrap() / 1.5).unwrap();
        assert!((p - m.entropic_rho_dual(&f, 2, 1.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn sharp_penalty_picks_single_measure() {
        let m = FiniteModel::example();
        let f = NodeClaim::new(2, vec![0.3, -1.0, 0.8, 0.1]).unwrap();
        let p = m.penalty_rho(&f, 2, |th| 100.0 * th[0].abs()).unwrap();
        assert!((p + m.expectation(&[0.0], f.values(), 2)).abs() < 1e-7);
    }

    #[test]
    fn infinite_penalty_is_rejected() {
        let m = FiniteModel::example();
        let f = m.indicator_claim(1.0).unwrap();
        assert!(matches!(m.penalty_rho(&f, 2, |_| f64::INFINITY), Err(MirmError::InvalidInput(_))));
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        let m = FiniteModel::example();
        let f = m.indicator_claim(1.0).unwrap();
        assert!(m.entropic_rho_dual(&f, 2, 0.0).is_err());
        assert!(m.entropic_rho_primal(&f, 2, -1.0).is_err());
    }

    #[test]
    fn indicator_matures_at_one_and_price_at_two() {
        let m = FiniteModel::example();
        let f = m.indicator_claim(2.0).unwrap().lift(m.market(), 2).unwrap();
        assert_eq!(earliest_maturity(&f, m.market()).unwrap(), 1);
        let s = NodeClaim::new(2, m.market().level(2).iter().map(|n| n.price).collect()).unwrap();
        assert_eq!(earliest_maturity(&s, m.market()).unwrap(), 2);
    }

    #[test]
    fn classical_measure_is_convex_but_not_maturity_independent() {
        let m = FiniteModel::example();
        let e = ClassicalEntropic { model: &m, gamma: 1.0 };
        for ax in [Axiom::AntiPositivity, Axiom::Convexity, Axiom::CashTranslativity] {
            let r = axiom_check(&e, ax, 100, 5).unwrap();
            assert!(r.passes(1e-9), "{ax}: {}", r.max_violation);
        }
        let r = axiom_check(&e, Axiom::ReplicationMaturityIndependence, 200, 5).unwrap();
        assert!(r.max_violation > 1e-3, "{}", r.max_violation);
    }

    #[test]
    fn superhedging_satisfies_all_axioms() {
        let m = FiniteModel::example();
        let e = SuperHedge { model: &m };
        for ax in Axiom::ALL {
            let r = axiom_check(&e, ax, 100, 9).unwrap();
            assert!(r.passes(1e-12), "{ax}: {}", r.max_violation);
        }
    }

    #[test]
    fn printed_ratio_convention_changes_depth_two_values() {
        let std = FiniteModel::example();
        let alt = FiniteModel::with_convention(FiniteTreeMarket::example(), EntropyConvention::PrintedRatio).unwrap();
        let f = std.indicator_claim(1.0).unwrap();
        let a = std.entropic_rho_dual(&f, 2, 1.0).unwrap();
        let b = alt.entropic_rho_dual(&f, 2, 1.0).unwrap();
        assert!((a - b).abs() > 1e-3);
        assert_eq!(std.entropic_rho_dual(&f, 1, 1.0).unwrap(), alt.entropic_rho_dual(&f, 1, 1.0).unwrap());
        let z = NodeClaim::constant(alt.market(), 2, 0.0).unwrap();
        assert!(alt.entropic_rho_dual(&z, 2, 1.0).unwrap().abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn primal_and_dual_agree(v in proptest::collection::vec(-3.0f64..3.0, 4), gamma in 0.2f64..3.0) {
            let m = FiniteModel::example();
            let f = NodeClaim::new(2, v).unwrap();
            let d = m.entropic_rho_dual(&f, 2, gamma).unwrap();
            let p = m.entropic_rho_primal(&f, 2, gamma).unwrap();
            prop_assert!((d - p).abs() <= 1e-8, "dual {} primal {}", d, p);
        }

        #[test]
        fn measures_are_ordered(v in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let m = FiniteModel::example();
            let f = NodeClaim::new(2, v).unwrap();
            let sh = m.superhedge_rho(&f, 2).unwrap();
            let ent = m.entropic_rho_dual(&f, 2, 1.0).unwrap();
            let c = m.curve(2);
            let heavier = m.penalty_rho(&f, 2, |th| 3.0 * c.normalized_unchecked(th)).unwrap();
            prop_assert!(sh >= ent - 1e-12);
            prop_assert!(ent >= heavier - 1e-12);
        }

        #[test]
        fn raw_penalties_order_depth_one_claims(v in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let m = FiniteModel::example();
            let f = NodeClaim::new(1, v).unwrap();
            let (c1, c2) = (m.curve(1), m.curve(2));
            let r1 = m.penalty_rho(&f, 1, |th| c1.raw_unchecked(th)).unwrap();
            let r2 = m.penalty_rho(&f, 2, |th| c2.raw_unchecked(th)).unwrap();
            prop_assert!(r1 >= r2 - 1e-12);
        }

        #[test]
        fn nonnegative_claims_have_nonpositive_risk(v in proptest::collection::vec(0.0f64..2.0, 4)) {
            let m = FiniteModel::example();
            let f = NodeClaim::new(2, v).unwrap();
            prop_assert!(m.entropic_rho_dual(&f, 2, 1.0).unwrap() <= 1e-12);
            prop_assert!(m.superhedge_rho(&f, 2).unwrap() <= 0.0);
        }
    }
}
