//! Operator side of the coordination loop.
//!
//! Each iteration the operator broadcasts a per-PCC signal `u`, every agent
//! best-responds, the operator measures the average flow per PCC and updates
//! the signal with a control law. The default law is projected dual ascent on
//! the two-sided coupling constraint followed by Krasnoselskij–Mann averaging
//! of the broadcast signal.

use serde::{Deserialize, Serialize};

use crate::error::CoordinatorError;
use crate::model::{HouseholdState, PccId, SlotConfig, Strategy};
use crate::response::{battery_setpoint, best_response_within, relaxed_interval, response_objective, FeasibleInterval};

/// Bounds on the average grid flow per PCC, in kWh per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub c_lo: Vec<f64>,
    pub c_hi: Vec<f64>,
}

impl ConstraintSet {
    pub fn new(c_lo: Vec<f64>, c_hi: Vec<f64>) -> Result<Self, CoordinatorError> {
        if c_lo.len() != c_hi.len() {
            return Err(CoordinatorError::Dimension(format!(
                "{} lower bounds, {} upper bounds",
                c_lo.len(),
                c_hi.len()
            )));
        }
        if let Some(p) = c_lo.iter().zip(&c_hi).position(|(lo, hi)| !(lo <= hi)) {
            return Err(CoordinatorError::Dimension(format!("c_lo > c_hi at pcc{p}")));
        }
        Ok(Self { c_lo, c_hi })
    }

    pub fn unbounded(n_pcc: usize) -> Self {
        Self {
            c_lo: vec![f64::NEG_INFINITY; n_pcc],
            c_hi: vec![f64::INFINITY; n_pcc],
        }
    }

    pub fn len(&self) -> usize {
        self.c_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_lo.is_empty()
    }

    /// Largest amount by which `avg` leaves the box (0 when inside).
    pub fn violation(&self, avg: &[f64]) -> f64 {
        avg.iter()
            .enumerate()
            .map(|(p, &a)| (self.c_lo[p] - a).max(a - self.c_hi[p]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, avg: &[f64], tol: f64) -> bool {
        self.violation(avg) <= tol
    }
}

/// Broadcast signal and dual penalties per PCC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub u: Vec<f64>,
    pub lambda_up: Vec<f64>,
    pub lambda_dn: Vec<f64>,
    pub iteration: usize,
}

impl ControlSignal {
    pub fn zeros(n_pcc: usize) -> Self {
        Self {
            u: vec![0.0; n_pcc],
            lambda_up: vec![0.0; n_pcc],
            lambda_dn: vec![0.0; n_pcc],
            iteration: 0,
        }
    }

    /// Net penalty `lambda_up - lambda_dn` at each PCC.
    pub fn net_penalty(&self) -> Vec<f64> {
        self.lambda_up.iter().zip(&self.lambda_dn).map(|(u, d)| u - d).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatorConfig {
    /// Diagonal of the aggregate coupling matrix, €/kWh² per PCC.
    pub d_scale: Vec<f64>,
    pub step_beta: f64,
    pub avg_gamma: f64,
    pub tol_u: f64,
    pub tol_c: f64,
    pub max_iterations: usize,
    pub iteration_period_s: f64,
    pub slot_duration_s: f64,
}

/// Default multiplier on `mean(a) + mean(a_r)` for the dual step.
pub const DEFAULT_BETA_FACTOR: f64 = 6.0;

impl CoordinatorConfig {
    /// Defaults derived from the population: `beta = factor · (mean(a) + mean(a_r))`.
    pub fn for_agents(agents: &[HouseholdState], n_pcc: usize, slots: &SlotConfig, beta_factor: f64) -> Self {
        let n = agents.len().max(1) as f64;
        let mean_a = agents.iter().map(|h| h.battery.a).sum::<f64>() / n;
        let mean_ar = agents.iter().map(|h| h.prices.a_r).sum::<f64>() / n;
        Self {
            d_scale: vec![0.01; n_pcc],
            step_beta: beta_factor * (mean_a + mean_ar),
            avg_gamma: 0.5,
            tol_u: 1e-4,
            tol_c: 1e-3,
            max_iterations: slots.max_iterations as usize,
            iteration_period_s: f64::from(slots.iteration_period_s),
            slot_duration_s: f64::from(slots.slot_seconds()),
        }
    }

    pub fn validate(&self) -> Result<(), CoordinatorError> {
        let bad = |m: &str| Err(CoordinatorError::Dimension(m.to_string()));
        if self.d_scale.iter().any(|d| !(*d >= 0.0)) {
            return bad("d_scale must be non-negative");
        }
        if !(self.step_beta > 0.0) {
            return bad("step_beta must be positive");
        }
        if !(self.avg_gamma > 0.0 && self.avg_gamma <= 1.0) {
            return bad("avg_gamma must lie in (0, 1]");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if self.max_iterations as f64 * self.iteration_period_s > self.slot_duration_s + 1e-9 {
            return bad("iteration budget exceeds the slot duration");
        }
        Ok(())
    }
}

/// Signal update rule `u_(k+1) = κ(k, u_(k))`.
pub trait ControlLaw {
    fn update(&self, sig: &ControlSignal, measured_avg: &[f64], c: &ConstraintSet) -> ControlSignal;
}

impl ControlLaw for CoordinatorConfig {
    fn update(&self, sig: &ControlSignal, measured_avg: &[f64], c: &ConstraintSet) -> ControlSignal {
        control_update(self, sig, measured_avg, c)
    }
}

/// Per-PCC sum of grid flows divided by the total number of households.
pub fn aggregate(strategies: &[Strategy], n_pcc: usize, households: usize) -> Vec<f64> {
    assert!(households >= 1, "aggregate needs at least one household");
    let mut avg = vec![0.0; n_pcc];
    for s in strategies {
        avg[s.pcc.0] += s.x;
    }
    let h = households as f64;
    avg.iter_mut().for_each(|a| *a /= h);
    avg
}

/// Projected dual ascent on both bounds, then averaging of the broadcast
/// towards `d ∘ avg + lambda_up - lambda_dn`.
pub fn control_update(
    cfg: &CoordinatorConfig,
    sig: &ControlSignal,
    measured_avg: &[f64],
    c: &ConstraintSet,
) -> ControlSignal {
    let n = sig.u.len();
    let mut next = ControlSignal::zeros(n);
    for p in 0..n {
        let lam_up = (sig.lambda_up[p] + cfg.step_beta * (measured_avg[p] - c.c_hi[p])).max(0.0);
        let lam_dn = (sig.lambda_dn[p] + cfg.step_beta * (c.c_lo[p] - measured_avg[p])).max(0.0);
        let target = cfg.d_scale[p] * measured_avg[p] + lam_up - lam_dn;
        next.lambda_up[p] = lam_up;
        next.lambda_dn[p] = lam_dn;
        next.u[p] = (1.0 - cfg.avg_gamma) * sig.u[p] + cfg.avg_gamma * target;
    }
    next.iteration = sig.iteration + 1;
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attainability {
    pub attainable: bool,
    /// Smallest slack between the constraint box and the average feasible set.
    pub margin: f64,
    /// Average feasible set per PCC; `None` where no household is connected.
    pub average_set: Vec<Option<FeasibleInterval>>,
}

/// Minkowski average `(1/H) Σ X_i` of the agents' feasible intervals, per PCC.
pub fn average_feasible_set(agents: &[HouseholdState], n_pcc: usize) -> Vec<Option<FeasibleInterval>> {
    let h = agents.len().max(1) as f64;
    let mut sets: Vec<Option<FeasibleInterval>> = vec![None; n_pcc];
    for a in agents {
        let (iv, _) = relaxed_interval(a);
        let slot = sets[a.pcc.0].get_or_insert(FeasibleInterval { lo: 0.0, hi: 0.0 });
        slot.lo += iv.lo / h;
        slot.hi += iv.hi / h;
    }
    sets
}

/// Tests whether every finite bound of `c` lies inside the average feasible set.
///
/// Infinite bounds impose nothing. A PCC without households cannot honour a
/// finite bound.
pub fn check_attainability(agents: &[HouseholdState], c: &ConstraintSet) -> Attainability {
    let average_set = average_feasible_set(agents, c.len());
    let mut margin = f64::INFINITY;
    for p in 0..c.len() {
        let (lo, hi) = (c.c_lo[p], c.c_hi[p]);
        match average_set[p] {
            None => {
                if lo.is_finite() || hi.is_finite() {
                    margin = f64::NEG_INFINITY;
                }
            }
            Some(set) => {
                if lo.is_finite() {
                    margin = margin.min(lo - set.lo).min(set.hi - lo);
                }
                if hi.is_finite() {
                    margin = margin.min(set.hi - hi).min(hi - set.lo);
                }
            }
        }
    }
    Attainability {
        attainable: margin >= 0.0,
        margin,
        average_set,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub household: u32,
    /// Whole-slot optimal grid flow at this iteration.
    pub x_star: f64,
    /// Battery setting for the rest of the slot.
    pub s_setpoint: f64,
    /// Grid energy exchanged before this iteration.
    pub x_0k: f64,
    /// Battery energy used before this iteration.
    pub s_0k: f64,
    /// Grid energy still to exchange until slot end.
    pub x_remaining: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Signal the agents responded to.
    pub u: Vec<f64>,
    /// Penalties after measuring this iteration's average.
    pub lambda_up: Vec<f64>,
    pub lambda_dn: Vec<f64>,
    pub avg: Vec<f64>,
    pub agents: Vec<AgentStep>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotTrace {
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub strategies: Vec<Strategy>,
    /// Signal after the accepted iteration.
    pub signal: ControlSignal,
    pub trace: SlotTrace,
    pub converged: bool,
    /// Iterations executed.
    pub iterations: usize,
    /// Index of the accepted iterate (the last one when converged).
    pub accepted_iteration: usize,
    /// Agents with their within-slot accumulators at the end of the loop.
    pub agents: Vec<HouseholdState>,
    /// Households whose contracted limit could not be met by the battery.
    pub clashes: Vec<u32>,
}

/// Runs the coordination loop for one slot with the default control law.
pub fn run_slot(
    agents: &[HouseholdState],
    c: &ConstraintSet,
    cfg: &CoordinatorConfig,
) -> Result<SlotOutcome, CoordinatorError> {
    run_slot_with(agents, c, cfg, cfg)
}

pub fn run_slot_with(
    agents: &[HouseholdState],
    c: &ConstraintSet,
    cfg: &CoordinatorConfig,
    law: &impl ControlLaw,
) -> Result<SlotOutcome, CoordinatorError> {
    if agents.is_empty() {
        return Err(CoordinatorError::NoAgents);
    }
    cfg.validate()?;
    let n_pcc = c.len();
    if cfg.d_scale.len() != n_pcc {
        return Err(CoordinatorError::Dimension(format!(
            "d_scale has {} entries for {} PCCs",
            cfg.d_scale.len(),
            n_pcc
        )));
    }
    if let Some(a) = agents.iter().find(|a| a.pcc.0 >= n_pcc) {
        return Err(CoordinatorError::Dimension(format!(
            "household {} at unknown {}",
            a.id, a.pcc
        )));
    }
    let att = check_attainability(agents, c);
    if !att.attainable {
        let pcc = (0..n_pcc)
            .find(|&p| {
                let one = ConstraintSet {
                    c_lo: (0..n_pcc)
                        .map(|q| if q == p { c.c_lo[q] } else { f64::NEG_INFINITY })
                        .collect(),
                    c_hi: (0..n_pcc)
                        .map(|q| if q == p { c.c_hi[q] } else { f64::INFINITY })
                        .collect(),
                };
                !check_attainability(agents, &one).attainable
            })
            .unwrap_or(0);
        return Err(CoordinatorError::NotAttainable {
            pcc: PccId(pcc),
            margin: att.margin,
        });
    }

    let h_total = agents.len();
    let d_over_h: Vec<f64> = cfg.d_scale.iter().map(|d| d / h_total as f64).collect();
    let mut work: Vec<HouseholdState> = agents.to_vec();
    let mut clashes = Vec::new();
    let intervals: Vec<FeasibleInterval> = agents
        .iter()
        .map(|a| {
            let (iv, clash) = relaxed_interval(a);
            if clash.is_some() {
                clashes.push(a.id);
            }
            iv
        })
        .collect();

    let mut sig = ControlSignal::zeros(n_pcc);
    let mut previous_x = vec![0.0; h_total];
    let mut trace = SlotTrace::default();
    let mut best: Option<(f64, usize, Vec<Strategy>, ControlSignal)> = None;
    let mut converged = false;
    let mut executed = 0;

    for k in 0..cfg.max_iterations {
        executed = k + 1;
        // Each agent sees the broadcast minus its own share of the aggregate
        // term, which it replaces by the exact quadratic self-term.
        let strategies: Vec<Strategy> = work
            .iter()
            .zip(&intervals)
            .zip(&previous_x)
            .map(|((a, iv), &x_prev)| {
                let p = a.pcc.0;
                best_response_within(a, *iv, sig.u[p] - d_over_h[p] * x_prev, d_over_h[p])
            })
            .collect();

        let remaining_s = cfg.slot_duration_s - k as f64 * cfg.iteration_period_s;
        let share = (cfg.iteration_period_s / remaining_s).min(1.0);
        let mut steps = Vec::with_capacity(h_total);
        for (a, st) in work.iter_mut().zip(&strategies) {
            let s_set = battery_setpoint(a, st.x);
            let x_rem = st.x - a.x_0k;
            steps.push(AgentStep {
                household: a.id,
                x_star: st.x,
                s_setpoint: s_set,
                x_0k: a.x_0k,
                s_0k: a.s_0k,
                x_remaining: x_rem,
            });
            // Flows held constant over the next iteration period.
            a.x_0k += share * x_rem;
            a.s_0k += share * s_set;
        }

        let avg = aggregate(&strategies, n_pcc, h_total);
        let next = law.update(&sig, &avg, c);
        let du = next
            .u
            .iter()
            .zip(&sig.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let viol = c.violation(&avg);
        trace.iterations.push(IterationRecord {
            iteration: k,
            u: sig.u.clone(),
            lambda_up: next.lambda_up.clone(),
            lambda_dn: next.lambda_dn.clone(),
            avg,
            agents: steps,
        });

        let score = (viol / cfg.tol_c).max(du / cfg.tol_u);
        if best.as_ref().is_none_or(|b| score <= b.0) {
            best = Some((score, k, strategies.clone(), next.clone()));
        }
        if du <= cfg.tol_u && viol <= cfg.tol_c {
            converged = true;
            best = Some((score, k, strategies, next));
            break;
        }
        previous_x = strategies.iter().map(|s| s.x).collect();
        sig = next;
    }

    let (_, accepted, strategies, signal) = best.expect("at least one iteration runs");
    Ok(SlotOutcome {
        strategies,
        signal,
        trace,
        converged,
        iterations: executed,
        accepted_iteration: accepted,
        agents: work,
        clashes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// Largest cost reduction any single agent could obtain unilaterally.
    pub max_regret: f64,
    pub worst_agent: Option<u32>,
    pub regrets: Vec<f64>,
    pub average: Vec<f64>,
    pub constraint_violation: f64,
    pub within_constraints: bool,
}

/// Checks the aggregative-equilibrium conditions for `strategies` under the
/// penalties carried by `sig`.
///
/// Each agent's objective is `f(y) + (D/H (y + Σ_{j≠i} x_j) + λ) y` restricted
/// to its own PCC; the regret is the gap to its exact minimiser with the
/// others held fixed.
pub fn verify_equilibrium(
    strategies: &[Strategy],
    sig: &ControlSignal,
    agents: &[HouseholdState],
    cfg: &CoordinatorConfig,
    c: &ConstraintSet,
) -> EquilibriumReport {
    let n_pcc = c.len();
    let h_total = agents.len().max(1);
    let lambda = sig.net_penalty();
    let mut totals = vec![0.0; n_pcc];
    for s in strategies {
        totals[s.pcc.0] += s.x;
    }
    let mut regrets = Vec::with_capacity(agents.len());
    for (a, s) in agents.iter().zip(strategies) {
        let p = a.pcc.0;
        let dh = cfg.d_scale[p] / h_total as f64;
        let others = totals[p] - s.x;
        let linear = dh * others + lambda[p];
        let (iv, _) = relaxed_interval(a);
        let br = best_response_within(a, iv, linear, dh);
        let current = response_objective(a, s.x, linear, dh);
        let optimum = response_objective(a, br.x, linear, dh);
        regrets.push((current - optimum).max(0.0));
    }
    let (worst_idx, max_regret) =
        regrets
            .iter()
            .copied()
            .enumerate()
            .fold((None, 0.0), |acc, (i, r)| if r > acc.1 { (Some(i), r) } else { acc });
    let average = aggregate(strategies, n_pcc, h_total);
    let constraint_violation = c.violation(&average);
    EquilibriumReport {
        max_regret,
        worst_agent: worst_idx.map(|i| agents[i].id),
        regrets,
        within_constraints: constraint_violation <= cfg.tol_c,
        average,
        constraint_violation,
    }
}
