//! Real-time control of residential flows on a low-voltage feeder.
//!
//! Prosumer agents best-respond to a broadcast per-PCC price signal; a
//! coordinator drives the signal toward an aggregative equilibrium that
//! satisfies bounds on the average flow at each point of common coupling.
//! The bounds come from a radial load flow of the feeder.

// NaN must fail validation, so `!(x >= 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coordinator;
pub mod costs;
pub mod error;
pub mod harness;
pub mod model;
pub mod powerflow;
pub mod response;

pub use coordinator::{
    run_slot, verify_equilibrium, ConstraintSet, ControlSignal, CoordinatorConfig, EquilibriumReport, SlotOutcome,
};
pub use error::{Error, Result};
pub use model::{load_scenario, HouseholdState, PccId, Scenario, SlotConfig, Strategy};
pub use powerflow::{solve_load_flow, FeederModel, LoadFlowResult};
pub use response::{best_response, FeasibleInterval};
