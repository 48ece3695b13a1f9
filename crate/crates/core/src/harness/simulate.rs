//! Multi-slot driver: phase rebalancing, load-flow monitoring, constraint
//! derivation and the coordination loop, slot after slot.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::coordinator::{
    average_feasible_set, run_slot, verify_equilibrium, ConstraintSet, CoordinatorConfig, SlotTrace,
    DEFAULT_BETA_FACTOR,
};
use crate::costs::{coupled_cost, CostBreakdown};
use crate::error::{Error, FeederError, Result};
use crate::model::{load_scenario, HouseholdState, PccId, Scenario, Strategy};
use crate::powerflow::{
    check_limits, derive_constraints, node_injections, rebalance_phases, solve_load_flow, tighten_violating_baseline,
    DeriveOptions, Direction, FeederModel, LoadFlowResult, Placement,
};
use crate::response::{best_response_within, relaxed_interval, FeasibleInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "no-control")]
    NoControl,
    #[serde(rename = "dps-only")]
    DpsOnly,
    #[serde(rename = "rtc+dps")]
    RtcDps,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NoControl, Mode::DpsOnly, Mode::RtcDps];

    pub fn uses_dps(self) -> bool {
        self != Mode::NoControl
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NoControl => "no-control",
            Mode::DpsOnly => "dps-only",
            Mode::RtcDps => "rtc+dps",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}' (expected no-control, dps-only or rtc+dps)")))
    }
}

/// Tunable parameters of a run; each can be overridden with `key=value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Dual step as a multiple of `mean(a) + mean(a_r)`.
    pub beta_factor: f64,
    /// Aggregate coupling coefficient, equal on every PCC.
    pub d: f64,
    pub gamma: f64,
    pub tol_u: f64,
    pub tol_c: f64,
    pub step_frac: f64,
    pub max_scale: f64,
    /// Extra coordination rounds with a tighter bound when the equilibrium
    /// flows still violate.
    pub tighten_rounds: usize,
    pub tighten_frac: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            beta_factor: DEFAULT_BETA_FACTOR,
            d: 0.01,
            gamma: 0.5,
            tol_u: 1e-4,
            tol_c: 1e-3,
            step_frac: 0.02,
            max_scale: 10.0,
            tighten_rounds: 8,
            tighten_frac: 0.05,
        }
    }
}

impl SimParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: '{value}' is not a finite number")))
        };
        match key {
            "beta_factor" => self.beta_factor = num()?,
            "d" => self.d = num()?,
            "gamma" => self.gamma = num()?,
            "tol_u" => self.tol_u = num()?,
            "tol_c" => self.tol_c = num()?,
            "step_frac" => self.step_frac = num()?,
            "max_scale" => self.max_scale = num()?,
            "tighten_frac" => self.tighten_frac = num()?,
            "tighten_rounds" => {
                self.tighten_rounds = value
                    .parse()
                    .map_err(|_| Error::Config(format!("tighten_rounds: '{value}' is not a count")))?
            }
            _ => return Err(Error::Config(format!("unknown parameter '{key}'"))),
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta_factor", self.beta_factor),
            ("tol_u", self.tol_u),
            ("tol_c", self.tol_c),
            ("step_frac", self.step_frac),
            ("tighten_frac", self.tighten_frac),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{k} must be positive (got {v})")));
        }
        if !(self.d >= 0.0) {
            return Err(Error::Config("d must be non-negative".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if !(self.max_scale > 1.0) {
            return Err(Error::Config("max_scale must exceed 1".into()));
        }
        Ok(())
    }

    pub(crate) fn coordinator(&self, agents: &[HouseholdState], scenario: &Scenario) -> CoordinatorConfig {
        let mut cfg = CoordinatorConfig::for_agents(agents, scenario.n_pcc(), &scenario.slots, self.beta_factor);
        cfg.d_scale = vec![self.d; scenario.n_pcc()];
        cfg.avg_gamma = self.gamma;
        cfg.tol_u = self.tol_u;
        cfg.tol_c = self.tol_c;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub scenario_path: PathBuf,
    pub output_dir: PathBuf,
    /// Recorded in the manifest; the simulation itself draws no random numbers.
    pub seed: u64,
    pub overrides: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn params(&self) -> Result<SimParams> {
        let mut p = SimParams::default();
        for (k, v) in &self.overrides {
            p.set(k, v)?;
        }
        Ok(p)
    }
}

/// Outcome of the coordination loop in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtcRecord {
    pub direction: Direction,
    pub converged: bool,
    pub iterations: usize,
    pub accepted_iteration: usize,
    pub max_regret: f64,
    pub tighten_rounds: usize,
    pub constraints: ConstraintSet,
    pub u: Vec<f64>,
    pub lambda_up: Vec<f64>,
    pub lambda_dn: Vec<f64>,
    pub average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub baseline_v_dev: f64,
    pub baseline_i_frac: f64,
    pub max_v_dev: f64,
    pub max_i_frac: f64,
    pub violation: bool,
    pub monitor_trigger: bool,
    pub load_flow_converged: bool,
    pub slack_kw: f64,
    pub losses_kw: f64,
    pub rtc: Option<RtcRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdRecord {
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
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    /// Scenario file the run was loaded from, when there is one.
    pub scenario_path: Option<PathBuf>,
    pub seed: u64,
    pub params: SimParams,
    pub horizon: usize,
    pub node_phase: Vec<u8>,
    pub slots: Vec<SlotRecord>,
    pub households: Vec<HouseholdRecord>,
    /// Node voltage magnitudes (V) per slot.
    pub voltages: Vec<Vec<f64>>,
    /// Line currents (A) per slot.
    pub currents: Vec<Vec<f64>>,
    pub traces: Vec<(usize, SlotTrace)>,
}

impl RunSummary {
    pub fn rtc_slots(&self) -> impl Iterator<Item = (&SlotRecord, &RtcRecord)> {
        self.slots.iter().filter_map(|s| s.rtc.as_ref().map(|r| (s, r)))
    }

    /// True when some slot ran the coordination loop without converging.
    pub fn has_non_convergence(&self) -> bool {
        self.rtc_slots().any(|(_, r)| !r.converged)
    }
}

/// Loads the scenario named in `cfg` and simulates it.
pub fn simulate_horizon(cfg: &RunConfig) -> Result<RunSummary> {
    let params = cfg.params()?;
    let scenario = load_scenario(&cfg.scenario_path)?;
    let mut summary = simulate_scenario(&scenario, cfg.mode, &params, cfg.seed)?;
    summary.scenario_path = Some(cfg.scenario_path.clone());
    Ok(summary)
}

/// Where each household can connect: node and PCC per phase position.
struct Sockets {
    phases: Vec<u8>,
    options: Vec<Vec<Option<(usize, PccId)>>>,
    switchable: Vec<bool>,
}

impl Sockets {
    fn new(s: &Scenario) -> Self {
        let phases = s.feeder.phases().to_vec();
        let options: Vec<Vec<Option<(usize, PccId)>>> = s
            .households
            .iter()
            .map(|h| {
                phases
                    .iter()
                    .map(|&ph| {
                        let node = s.feeder.node_at(h.bus, ph).ok()?;
                        Some((node, s.feeder.pcc_of(node)?))
                    })
                    .collect()
            })
            .collect();
        let switchable = s
            .households
            .iter()
            .zip(&options)
            .map(|(h, o)| h.switchable && o.iter().all(Option::is_some))
            .collect();
        Self {
            phases,
            options,
            switchable,
        }
    }

    fn placement(&self, household: usize, phase_pos: usize) -> Placement {
        let (node, pcc) = self.options[household][phase_pos].expect("assigned phases always have a socket");
        Placement { node, pcc }
    }
}

pub fn simulate_scenario(scenario: &Scenario, mode: Mode, params: &SimParams, seed: u64) -> Result<RunSummary> {
    params.validate()?;
    let f = &scenario.feeder;
    let n_h = scenario.households.len();
    let slot_h = scenario.slots.slot_hours();
    let sockets = Sockets::new(scenario);
    let mut phase_pos: Vec<usize> = scenario
        .households
        .iter()
        .map(|h| {
            sockets
                .phases
                .iter()
                .position(|&p| p == h.phase)
                .expect("validated phase")
        })
        .collect();
    let mut e0: Vec<f64> = scenario.households.iter().map(|h| h.battery.e_init).collect();
    let mut prev_trigger = false;

    let mut summary = RunSummary {
        mode,
        scenario_path: None,
        seed,
        params: params.clone(),
        horizon: scenario.horizon,
        node_phase: f.nodes().iter().map(|n| n.phase).collect(),
        slots: Vec::with_capacity(scenario.horizon),
        households: Vec::with_capacity(scenario.horizon * n_h),
        voltages: Vec::with_capacity(scenario.horizon),
        currents: Vec::with_capacity(scenario.horizon),
        traces: Vec::new(),
    };

    for t in 0..scenario.horizon {
        let mut states: Vec<HouseholdState> = (0..n_h).map(|i| scenario.household_state(i, t, e0[i])).collect();
        let baseline: Vec<f64> = states
            .iter()
            .map(|h| best_response_within(h, relaxed_interval(h).0, 0.0, 0.0).x)
            .collect();
        if mode.uses_dps() {
            phase_pos = rebalance_phases(sockets.phases.len(), &phase_pos, &sockets.switchable, &baseline);
        }
        let placements: Vec<Placement> = (0..n_h).map(|i| sockets.placement(i, phase_pos[i])).collect();
        for (st, pl) in states.iter_mut().zip(&placements) {
            st.pcc = pl.pcc;
        }
        let baseline_kw: Vec<f64> = baseline.iter().map(|x| x / slot_h).collect();
        let base_lf = solve_load_flow(f, &node_injections(f, &placements, &baseline_kw))?;

        let mut applied = baseline.clone();
        let mut final_lf = None;
        let mut rtc = None;
        let mut error = None;
        let mut signal_u = vec![0.0; scenario.n_pcc()];
        let window = scenario.monitoring_window.contains(scenario.slot_of_day(t));
        if mode == Mode::RtcDps && window && prev_trigger {
            match coordinate(scenario, params, &states, &placements, &baseline_kw) {
                Ok(c) => {
                    debug!(slot = t, iterations = c.record.iterations, "coordination finished");
                    applied = c.flows;
                    signal_u = c.record.u.clone();
                    final_lf = Some(c.load_flow);
                    summary.traces.push((t, c.trace));
                    rtc = Some(c.record);
                }
                Err(e) => {
                    warn!(slot = t, error = %e, "coordination failed; baseline flows applied");
                    error = Some(e.to_string());
                }
            }
        }
        let lf = final_lf.unwrap_or_else(|| base_lf.clone());
        let status = check_limits(&lf, f);
        prev_trigger = status.monitor_trigger;

        for (i, st) in states.iter().enumerate() {
            let x = applied[i];
            let s = st.r - x;
            summary.households.push(HouseholdRecord {
                slot: t,
                household: st.id,
                pcc: st.pcc.0,
                phase: sockets.phases[phase_pos[i]],
                r: st.r,
                x_hat: st.commitment.x_hat,
                x,
                s,
                e0: e0[i],
                e_min: st.battery.e_min,
                e_max: st.battery.e_max,
                cost: coupled_cost(st, x, signal_u[st.pcc.0]),
            });
            e0[i] -= s;
        }
        summary.slots.push(SlotRecord {
            slot: t,
            baseline_v_dev: base_lf.max_v_dev_frac,
            baseline_i_frac: base_lf.max_i_frac_of_ampacity,
            max_v_dev: lf.max_v_dev_frac,
            max_i_frac: lf.max_i_frac_of_ampacity,
            violation: status.violation,
            monitor_trigger: status.monitor_trigger,
            load_flow_converged: lf.converged,
            slack_kw: lf.slack_kw,
            losses_kw: lf.losses_kw,
            rtc,
            error,
        });
        summary.voltages.push(lf.node_voltages);
        summary.currents.push(lf.line_currents);
    }
    Ok(summary)
}

struct Coordinated {
    flows: Vec<f64>,
    load_flow: LoadFlowResult,
    record: RtcRecord,
    trace: SlotTrace,
}

/// Keeps finite bounds inside the average feasible set; PCCs without
/// households are left unconstrained.
fn clip(c: &mut ConstraintSet, set: &[Option<FeasibleInterval>]) {
    for p in 0..c.len() {
        match set[p] {
            None => {
                c.c_lo[p] = f64::NEG_INFINITY;
                c.c_hi[p] = f64::INFINITY;
            }
            Some(iv) => {
                if c.c_lo[p].is_finite() {
                    c.c_lo[p] = c.c_lo[p].clamp(iv.lo, iv.hi);
                }
                if c.c_hi[p].is_finite() {
                    c.c_hi[p] = c.c_hi[p].clamp(iv.lo, iv.hi);
                }
            }
        }
    }
}

fn coordinate(
    scenario: &Scenario,
    params: &SimParams,
    states: &[HouseholdState],
    placements: &[Placement],
    baseline_kw: &[f64],
) -> Result<Coordinated> {
    let f = &scenario.feeder;
    let slot_h = scenario.slots.slot_hours();
    let direction = if baseline_kw.iter().sum::<f64>() < 0.0 {
        Direction::Injection
    } else {
        Direction::Demand
    };
    let opts = DeriveOptions {
        direction,
        step_frac: params.step_frac,
        max_scale: params.max_scale,
        slot_hours: slot_h,
    };
    let set = average_feasible_set(states, scenario.n_pcc());
    let derived = match derive_constraints(f, placements, baseline_kw, &opts, Some(&set)) {
        Err(FeederError::BaselineViolating) => {
            tighten_violating_baseline(f, placements, baseline_kw, &opts, Some(&set))?
        }
        other => other?,
    };
    let mut c = derived.constraints;
    clip(&mut c, &set);
    let cfg = params.coordinator(states, scenario);

    let mut round = 0;
    loop {
        let out = run_slot(states, &c, &cfg)?;
        let flows: Vec<f64> = out.strategies.iter().map(|s| s.x).collect();
        let kw: Vec<f64> = flows.iter().map(|x| x / slot_h).collect();
        let lf = solve_load_flow(f, &node_injections(f, placements, &kw))?;
        let status = check_limits(&lf, f);
        if !status.violation || round == params.tighten_rounds {
            let report = verify_equilibrium(&out.strategies, &out.signal, states, &cfg, &c);
            let last = out.trace.iterations.get(out.accepted_iteration);
            return Ok(Coordinated {
                flows,
                load_flow: lf,
                record: RtcRecord {
                    direction,
                    converged: out.converged,
                    iterations: out.iterations,
                    accepted_iteration: out.accepted_iteration,
                    max_regret: report.max_regret,
                    tighten_rounds: round,
                    constraints: c,
                    u: last.map_or_else(|| out.signal.u.clone(), |r| r.u.clone()),
                    lambda_up: out.signal.lambda_up,
                    lambda_dn: out.signal.lambda_dn,
                    average: report.average,
                },
                trace: out.trace,
            });
        }
        round += 1;
        for p in violating_pccs(f, &lf) {
            match direction {
                Direction::Injection => {
                    let base = if c.c_lo[p].is_finite() {
                        c.c_lo[p]
                    } else {
                        report_avg(&out.strategies, p, states.len())
                    };
                    c.c_lo[p] = base + params.tighten_frac * base.abs();
                }
                Direction::Demand => {
                    let base = if c.c_hi[p].is_finite() {
                        c.c_hi[p]
                    } else {
                        report_avg(&out.strategies, p, states.len())
                    };
                    c.c_hi[p] = base - params.tighten_frac * base.abs();
                }
            }
        }
        clip(&mut c, &set);
    }
}

fn report_avg(strategies: &[Strategy], p: usize, h: usize) -> f64 {
    strategies.iter().filter(|s| s.pcc.0 == p).map(|s| s.x).sum::<f64>() / h as f64
}

/// PCCs upstream of a node or line outside its limits.
fn violating_pccs(f: &FeederModel, lf: &LoadFlowResult) -> Vec<usize> {
    let mut out = Vec::new();
    let mut mark = |node: usize| {
        if let Some(pcc) = f.pcc_of(node) {
            if !out.contains(&pcc.0) {
                out.push(pcc.0);
            }
        }
    };
    for (n, v) in lf.node_voltages.iter().enumerate() {
        if (v - f.slack_voltage).abs() / f.slack_voltage > f.v_limit_frac {
            mark(n);
        }
    }
    for (line, i) in f.lines().iter().zip(&lf.line_currents) {
        if *i > line.ampacity {
            mark(line.to);
        }
    }
    out.sort_unstable();
    out
}
