//! Finite information trees: martingale families, relative entropy and the
//! entropic, super-hedging and penalty risk measures.

mod entropy;
mod family;
mod market;
mod measures;
mod optimize;
mod scan;

pub use entropy::{relative_entropy, EntropyConvention, EntropyCurve};
pub use family::{MartingaleMeasureFamily, NodeFamily, CLOSURE_TOL};
pub use market::{FiniteTreeMarket, MarketFile, NodeId, NodeSpec, TreeNode};
pub use measures::{ClassicalEntropic, DualSolution, FiniteModel, SuperHedge};
pub use optimize::{maximize_over_family, FamilyMax, SearchOptions};
pub use scan::{noncompliance_scan, ScanRow, ScanTable};
