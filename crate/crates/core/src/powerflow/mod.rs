//! Radial per-phase load flow, grid limit checks, constraint derivation and
//! phase rebalancing.

mod constraints;
mod feeder;
mod phases;
mod sweep;

pub use constraints::{
    check_limits, derive_constraints, node_injections, tighten_violating_baseline, DeriveOptions, DerivedConstraints,
    Direction, LimitKind, LimitStatus, Placement,
};
pub use feeder::{FeederModel, FeederNode, FeederSpec, Line};
pub use phases::{phase_sums, phase_variance, rebalance_phases};
pub use sweep::{solve_load_flow, LoadFlowResult, MAX_SWEEPS, SWEEP_TOLERANCE_PU};
