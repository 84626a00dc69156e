//! Maturity-independent risk measures in incomplete markets.
//!
//! The crate covers four model families that share the claim and axiom
//! machinery in [`risk`]:
//!
//! * [`finite`]: exact entropic, super-hedging and penalty measures on
//!   finite information trees;
//! * [`binomial`]: forward entropic pricing on a binomial lattice with a
//!   non-traded factor;
//! * [`forward`]: Monte-Carlo forward exponential performance fields;
//! * [`pde`]: finite-difference solvers for a stochastic-volatility
//!   example with a Feynman-Kac cross-check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binomial;
pub mod error;
pub mod finite;
pub mod forward;
pub mod numeric;
pub mod pde;
pub mod risk;

pub use error::{MirmError, Result};
pub use risk::{
    axiom_check, axiom_check_with, earliest_maturity, Axiom, AxiomConfig, AxiomFailure, AxiomReport, Claim,
    Holdings, InformationTree, NodeClaim, RiskEvaluator, TradedTree, Witness,
};
