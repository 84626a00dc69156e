//! Forward exponential performance on the factor lattice and the forward
//! pricing functionals built from it.

use rayon::prelude::*;

use crate::binomial::lattice::FactorLattice;
use crate::error::{MirmError, Result};
use crate::numeric::{bisect_monotone, log_sum_exp, min_log_sum_exp_linear};
use crate::risk::{earliest_maturity, InformationTree, NodeClaim, RiskEvaluator};

/// `U_t(x) = -exp(-x + Σ_{k≤t} h_k)` at a depth-`t` node.
pub fn forward_u(lattice: &FactorLattice, t: usize, node: usize, x: f64) -> f64 {
    -(-x + lattice.cumulative_entropy(t, node)).exp()
}

/// Inverse of [`forward_u`] in `x`: `-ln(-y) + Σ_{k≤t} h_k` for `y < 0`.
pub fn forward_u_inv(lattice: &FactorLattice, t: usize, node: usize, y: f64) -> Result<f64> {
    if !(y < 0.0) {
        return Err(MirmError::Domain(format!("forward utility inverse needs y < 0, got {y}")));
    }
    Ok(-(-y).ln() + lattice.cumulative_entropy(t, node))
}

/// Single-period forward price at node `node` of depth `t`, given the
/// claim's values on the four children.
///
/// Equals `E_Q[ln E_Q[exp(C) | ξ]]` under the minimal measure: the
/// entropy terms of `U_{t+1}` and its inverse cancel, so the computation
/// is carried out in the log domain.
pub fn step_price(lattice: &FactorLattice, t: usize, node: usize, children: &[f64]) -> Result<f64> {
    if t >= lattice.horizon() {
        return Err(MirmError::Structural(format!("no period after depth {t}")));
    }
    if children.len() != 4 {
        return Err(MirmError::Structural(format!("expected 4 child values, got {}", children.len())));
    }
    Ok(step_unchecked(lattice, t, node, children))
}

fn step_unchecked(lattice: &FactorLattice, t: usize, node: usize, c: &[f64]) -> f64 {
    let p = lattice.physical_law(t, node);
    let q = lattice.q(t);
    let (pu, pd) = (p[0] + p[1], p[2] + p[3]);
    let up = log_sum_exp([(p[0] / pu).ln() + c[0], (p[1] / pu).ln() + c[1]]);
    let down = log_sum_exp([(p[2] / pd).ln() + c[2], (p[3] / pd).ln() + c[3]]);
    q * up + (1.0 - q) * down
}

/// `E^{(t, t')}(C)` for a claim declared at depth `t'`, as a node claim at
/// depth `t`.
pub fn multi_step_price(lattice: &FactorLattice, claim: &NodeClaim, t: usize) -> Result<NodeClaim> {
    claim.check(lattice)?;
    if t > claim.depth() {
        return Err(MirmError::Structural(format!(
            "start depth {t} is after the claim depth {}",
            claim.depth()
        )));
    }
    let mut values = claim.values().to_vec();
    for d in (t..claim.depth()).rev() {
        values = values
            .par_chunks(4)
            .enumerate()
            .map(|(i, c)| step_unchecked(lattice, d, i, c))
            .collect();
    }
    NodeClaim::new(t, values)
}

/// `E^{(0,t)}(-C)` with the claim regarded as a depth-`t` variable.
pub fn ferm_at(lattice: &FactorLattice, claim: &NodeClaim, t: usize) -> Result<f64> {
    if t > lattice.horizon() {
        return Err(MirmError::Structural(format!("depth {t} exceeds horizon {}", lattice.horizon())));
    }
    let neg = claim.lift(lattice, t)?.map(|v| -v)?;
    Ok(multi_step_price(lattice, &neg, 0)?.values()[0])
}

/// The maturity-independent measure `ρ(C) = E^{(0,t_C)}(-C)`.
pub fn ferm_binomial(lattice: &FactorLattice, claim: &NodeClaim) -> Result<f64> {
    let tc = earliest_maturity(claim, lattice)?;
    ferm_at(lattice, claim, tc)
}

/// `ρ(C; t)` for every `t` from the earliest maturity to the horizon.
pub fn invariance_table(lattice: &FactorLattice, claim: &NodeClaim) -> Result<Vec<(usize, f64)>> {
    let tc = earliest_maturity(claim, lattice)?;
    (tc..=lattice.horizon()).map(|t| Ok((t, ferm_at(lattice, claim, t)?))).collect()
}

/// `ln inf_α E_P[exp(-(C + Σ α ΔS) + Σ_{k≤t} h_k)]` by backward induction.
fn log_value(lattice: &FactorLattice, claim_t: &[f64], t: usize) -> Result<f64> {
    let mut level: Vec<f64> = claim_t
        .iter()
        .enumerate()
        .map(|(i, c)| -c + lattice.cumulative_entropy(t, i))
        .collect();
    for d in (0..t).rev() {
        let xi = lattice.xi(d);
        level = level
            .par_chunks(4)
            .enumerate()
            .map(|(i, c)| {
                let p = lattice.physical_law(d, i);
                let s = lattice.s(d, i);
                let logs: Vec<f64> = (0..4).map(|m| c[m] + p[m].ln()).collect();
                let moves: Vec<f64> = (0..4).map(|m| s * (xi[m / 2] - 1.0)).collect();
                min_log_sum_exp_linear(&logs, &moves, 0.0)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(level[0])
}

/// Solves the indifference equation directly under the physical measure:
/// the cash amount `ρ` with
/// `sup_α E[U_t(x₀ + ρ + C + G_t)] = sup_α E[U_t(x₀ + G_t)]`.
pub fn indifference_oracle(lattice: &FactorLattice, claim: &NodeClaim, t: usize, x0: f64) -> Result<f64> {
    let tc = earliest_maturity(claim, lattice)?;
    if t < tc || t > lattice.horizon() {
        return Err(MirmError::Structural(format!(
            "maturity {t} must lie between the earliest maturity {tc} and the horizon {}",
            lattice.horizon()
        )));
    }
    let c = claim.lift(lattice, t)?;
    let with = log_value(lattice, c.values(), t)?;
    let without = log_value(lattice, &vec![0.0; c.values().len()], t)?;
    // optimal expected utilities as functions of initial wealth
    let best_with = |w: f64| -(with - w).exp();
    let target = -(without - x0).exp();
    bisect_monotone(|rho| best_with(x0 + rho) - target, 1e-15)
}

/// The forward entropic measure on a lattice as a risk evaluator.
#[derive(Debug, Clone, Copy)]
pub struct BinomialFerm<'a> {
    pub lattice: &'a FactorLattice,
}

impl RiskEvaluator for BinomialFerm<'_> {
    type Model = FactorLattice;

    fn model(&self) -> &FactorLattice {
        self.lattice
    }

    fn eval(&self, claim: &NodeClaim, maturity: usize) -> Result<f64> {
        ferm_at(self.lattice, claim, maturity)
    }
}
