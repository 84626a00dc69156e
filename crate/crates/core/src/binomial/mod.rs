//! Incomplete binomial market with a non-traded factor: minimal martingale
//! measure, forward exponential performance and the forward entropic risk
//! measure.
//!
//! All computations use risk aversion 1. For another `γ`, evaluate
//! `γ C` and divide the result by `γ`.

mod lattice;
mod pricing;

pub use lattice::{
    binary_entropy, minimal_law, path_index, path_string, FactorLattice, FactorModelSpec, LatticeClaimFile,
    Payoffs, PeriodSpec, MAX_HORIZON,
};
pub use pricing::{
    ferm_at, ferm_binomial, forward_u, forward_u_inv, indifference_oracle, invariance_table, multi_step_price,
    step_price, BinomialFerm,
};
