//! CSV and JSON artefacts of a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::simulate::{Mode, RunSummary, SimParams};
use crate::error::{Error, Result};

pub const VOLTAGES_CSV: &str = "voltages.csv";
pub const CURRENTS_CSV: &str = "currents.csv";
pub const HOUSEHOLDS_CSV: &str = "households.csv";
pub const SLOTS_CSV: &str = "slots.csv";
pub const EQUILIBRIA_CSV: &str = "equilibria.csv";
pub const COORDINATOR_TRACE_CSV: &str = "coordinator_trace.csv";
pub const AGENT_TRACE_CSV: &str = "agent_trace.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct VoltageRow {
    pub slot: usize,
    pub node: usize,
    pub phase: u8,
    #[serde(rename = "voltage_V")]
    pub voltage_v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CurrentRow {
    pub slot: usize,
    pub line: usize,
    #[serde(rename = "current_A")]
    pub current_a: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct HouseholdRow {
    pub slot: usize,
    pub household: u32,
    pub pcc: usize,
    pub phase: u8,
    pub r: f64,
    pub x_hat: f64,
    pub x: f64,
    pub s: f64,
    pub e0: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub degradation: f64,
    pub price: f64,
    pub reward: f64,
    pub local_total: f64,
    pub coupling: f64,
    pub total: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SlotRow {
    pub slot: usize,
    pub rtc_active: bool,
    pub baseline_v_dev: f64,
    pub baseline_i_frac: f64,
    pub max_v_dev: f64,
    pub max_i_frac: f64,
    pub violation: bool,
    pub monitor_trigger: bool,
    pub load_flow_converged: bool,
    pub slack_kw: f64,
    pub losses_kw: f64,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub max_regret: Option<f64>,
    pub tighten_rounds: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct EquilibriumRow {
    pub slot: usize,
    pub pcc: usize,
    pub c_lo: f64,
    pub c_hi: f64,
    pub u: f64,
    pub lambda_up: f64,
    pub lambda_dn: f64,
    pub avg_flow: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CoordinatorRow {
    pub slot: usize,
    pub iteration: usize,
    pub pcc: usize,
    pub u: f64,
    pub lambda_up: f64,
    pub lambda_dn: f64,
    pub avg_flow: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct AgentRow {
    pub slot: usize,
    pub iteration: usize,
    pub household: u32,
    pub x_star: f64,
    pub s_setpoint: f64,
    pub x_0k: f64,
    pub s_0k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: Mode,
    pub seed: u64,
    pub scenario: Option<PathBuf>,
    pub params: SimParams,
    pub horizon: usize,
    pub households: usize,
    pub nodes: usize,
    pub lines: usize,
    pub rtc_slots: usize,
    pub violating_slots: usize,
    pub non_converged_slots: usize,
    pub files: Vec<String>,
}

struct Sink {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl Sink {
    fn row(&mut self, r: impl Serialize) -> Result<()> {
        self.w.serialize(r).map_err(|e| csv_error(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Verification(format!("{}: {other:?}", path.display())),
    }
}

/// Writes every artefact of `summary` into `dir`, creating it if needed.
///
/// Headers are written explicitly so that an empty horizon still yields
/// well-formed files.
pub fn write_outputs(summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut v = headerless(dir, VOLTAGES_CSV, &["slot", "node", "phase", "voltage_V"])?;
    for (slot, volts) in summary.voltages.iter().enumerate() {
        for (node, &voltage_v) in volts.iter().enumerate() {
            v.row(VoltageRow {
                slot,
                node,
                phase: summary.node_phase[node],
                voltage_v,
            })?;
        }
    }
    v.finish()?;

    let mut c = headerless(dir, CURRENTS_CSV, &["slot", "line", "current_A"])?;
    for (slot, amps) in summary.currents.iter().enumerate() {
        for (line, &current_a) in amps.iter().enumerate() {
            c.row(CurrentRow { slot, line, current_a })?;
        }
    }
    c.finish()?;

    let mut h = headerless(
        dir,
        HOUSEHOLDS_CSV,
        &[
            "slot",
            "household",
            "pcc",
            "phase",
            "r",
            "x_hat",
            "x",
            "s",
            "e0",
            "e_min",
            "e_max",
            "degradation",
            "price",
            "reward",
            "local_total",
            "coupling",
            "total",
        ],
    )?;
    for r in &summary.households {
        h.row(HouseholdRow {
            slot: r.slot,
            household: r.household,
            pcc: r.pcc,
            phase: r.phase,
            r: r.r,
            x_hat: r.x_hat,
            x: r.x,
            s: r.s,
            e0: r.e0,
            e_min: r.e_min,
            e_max: r.e_max,
            degradation: r.cost.degradation,
            price: r.cost.price,
            reward: r.cost.reward,
            local_total: r.cost.local_total,
            coupling: r.cost.coupling,
            total: r.cost.total,
        })?;
    }
    h.finish()?;

    let mut s = headerless(
        dir,
        SLOTS_CSV,
        &[
            "slot",
            "rtc_active",
            "baseline_v_dev",
            "baseline_i_frac",
            "max_v_dev",
            "max_i_frac",
            "violation",
            "monitor_trigger",
            "load_flow_converged",
            "slack_kw",
            "losses_kw",
            "converged",
            "iterations",
            "max_regret",
            "tighten_rounds",
            "error",
        ],
    )?;
    let mut e = headerless(
        dir,
        EQUILIBRIA_CSV,
        &["slot", "pcc", "c_lo", "c_hi", "u", "lambda_up", "lambda_dn", "avg_flow"],
    )?;
    for r in &summary.slots {
        s.row(SlotRow {
            slot: r.slot,
            rtc_active: r.rtc.is_some(),
            baseline_v_dev: r.baseline_v_dev,
            baseline_i_frac: r.baseline_i_frac,
            max_v_dev: r.max_v_dev,
            max_i_frac: r.max_i_frac,
            violation: r.violation,
            monitor_trigger: r.monitor_trigger,
            load_flow_converged: r.load_flow_converged,
            slack_kw: r.slack_kw,
            losses_kw: r.losses_kw,
            converged: r.rtc.as_ref().map(|x| x.converged),
            iterations: r.rtc.as_ref().map(|x| x.iterations),
            max_regret: r.rtc.as_ref().map(|x| x.max_regret),
            tighten_rounds: r.rtc.as_ref().map(|x| x.tighten_rounds),
            error: r.error.clone(),
        })?;
        if let Some(x) = &r.rtc {
            for p in 0..x.constraints.len() {
                e.row(EquilibriumRow {
                    slot: r.slot,
                    pcc: p,
                    c_lo: x.constraints.c_lo[p],
                    c_hi: x.constraints.c_hi[p],
                    u: x.u[p],
                    lambda_up: x.lambda_up[p],
                    lambda_dn: x.lambda_dn[p],
                    avg_flow: x.average[p],
                })?;
            }
        }
    }
    s.finish()?;
    e.finish()?;

    let mut ct = headerless(
        dir,
        COORDINATOR_TRACE_CSV,
        &["slot", "iteration", "pcc", "u", "lambda_up", "lambda_dn", "avg_flow"],
    )?;
    let mut at = headerless(
        dir,
        AGENT_TRACE_CSV,
        &["slot", "iteration", "household", "x_star", "s_setpoint", "x_0k", "s_0k"],
    )?;
    for (slot, trace) in &summary.traces {
        for it in &trace.iterations {
            for p in 0..it.u.len() {
                ct.row(CoordinatorRow {
                    slot: *slot,
                    iteration: it.iteration,
                    pcc: p,
                    u: it.u[p],
                    lambda_up: it.lambda_up[p],
                    lambda_dn: it.lambda_dn[p],
                    avg_flow: it.avg[p],
                })?;
            }
            for a in &it.agents {
                at.row(AgentRow {
                    slot: *slot,
                    iteration: it.iteration,
                    household: a.household,
                    x_star: a.x_star,
                    s_setpoint: a.s_setpoint,
                    x_0k: a.x_0k,
                    s_0k: a.s_0k,
                })?;
            }
        }
    }
    ct.finish()?;
    at.finish()?;

    let files: Vec<String> = [
        VOLTAGES_CSV,
        CURRENTS_CSV,
        HOUSEHOLDS_CSV,
        SLOTS_CSV,
        EQUILIBRIA_CSV,
        COORDINATOR_TRACE_CSV,
        AGENT_TRACE_CSV,
        MANIFEST_JSON,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let n_households = summary.households.iter().filter(|r| r.slot == 0).count();
    let manifest = Manifest {
        mode: summary.mode,
        seed: summary.seed,
        scenario: summary.scenario_path.clone(),
        params: summary.params.clone(),
        horizon: summary.horizon,
        households: n_households,
        nodes: summary.node_phase.len(),
        lines: summary.currents.first().map_or(0, Vec::len),
        rtc_slots: summary.rtc_slots().count(),
        violating_slots: summary.slots.iter().filter(|s| s.violation).count(),
        non_converged_slots: summary.rtc_slots().filter(|(_, r)| !r.converged).count(),
        files: files.clone(),
    };
    let path = dir.join(MANIFEST_JSON);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

    Ok(files.iter().map(|f| dir.join(f)).collect())
}

/// A writer whose header is emitted up front instead of from the first row.
fn headerless(dir: &Path, name: &str, cols: &[&str]) -> Result<Sink> {
    let path = dir.join(name);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(|e| csv_error(&path, e))?;
    w.write_record(cols).map_err(|e| csv_error(&path, e))?;
    Ok(Sink { path, w })
}
