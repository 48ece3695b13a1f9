//! Multi-slot simulation driver, synthetic scenario generator and run
//! artefacts.

mod generate;
mod outputs;
mod simulate;
mod verify;

pub use generate::{default_tou, generate_synthetic_scenario, GeneratorParams};
pub use outputs::{
    write_outputs, Manifest, AGENT_TRACE_CSV, COORDINATOR_TRACE_CSV, CURRENTS_CSV, EQUILIBRIA_CSV, HOUSEHOLDS_CSV,
    MANIFEST_JSON, SLOTS_CSV, VOLTAGES_CSV,
};
pub use simulate::{
    simulate_horizon, simulate_scenario, HouseholdRecord, Mode, RtcRecord, RunConfig, RunSummary, SimParams, SlotRecord,
};
pub use verify::{verify_run, VerifyReport, REGRET_TOLERANCE};
