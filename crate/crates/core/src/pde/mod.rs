//! Finite-difference solver for the stochastic-volatility example: the
//! linear `f` and `g` equations, the quasilinear price equation for `p`,
//! a Feynman-Kac Monte Carlo check and the horizon comparison.

mod fk;
mod gap;
mod scheme;
mod solve;
mod spec;

pub use fk::{fk_oracle, fk_oracle_with_steps, FkEstimate, FkKind, FK_STEPS_PER_UNIT};
pub use gap::{noncompliance_gap, solve_pair, GapLevel, GapReport, HorizonPair};
pub use solve::{
    compute_g, solve_linear_f, solve_quasilinear_p, solve_quasilinear_p_lagged, GSolution, PdeSolution, Which,
};
pub use spec::{FkSign, Grid1D, LambdaFn, SvSpec};
