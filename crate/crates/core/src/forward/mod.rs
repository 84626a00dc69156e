//! Forward entropic risk in a continuous market with one traded asset and
//! one non-traded factor, estimated by Monte Carlo over piecewise-constant
//! strategies.

mod claim;
mod ferm;
mod paths;
mod spec;

pub use claim::{grid_index, PathClaim, PathClaimSpec, PathView};
pub use ferm::{
    density_equivalence, entropic_consistency, ferm_mc, supermartingale_probe, ConsistencyReport, DensityReport,
    McEstimate, ProbeReport, ProbeRow, StrategyFamily,
};
pub use paths::PathBundle;
pub use spec::{Coefficient, CoefficientSpec};
