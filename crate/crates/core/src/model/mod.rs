//! Problem parameters, grids and scope functions.

pub mod extremal;
pub mod grid;
pub mod params;
pub mod scope;

pub use extremal::{rescale_u_eps, talenti_extremal};
pub use grid::{GridFunction, GridSpec};
pub use params::{crit_exp, sphere_measure, ProblemParams};
pub use scope::{check_hypotheses, HypothesisReport, ScopeFamily, ScopeFunction};
