//! Grid limit checks and sensitivity-based derivation of the coupling
//! constraint on average PCC flows.

use serde::{Deserialize, Serialize};

use super::{solve_load_flow, FeederModel, LoadFlowResult};
use crate::coordinator::ConstraintSet;
use crate::error::FeederError;
use crate::model::PccId;
use crate::response::FeasibleInterval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitKind {
    Voltage,
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LimitStatus {
    pub violation: bool,
    pub monitor_trigger: bool,
    pub voltage_violation: bool,
    pub thermal_violation: bool,
}

impl LimitStatus {
    pub fn binding(&self) -> Option<LimitKind> {
        if self.voltage_violation {
            Some(LimitKind::Voltage)
        } else if self.thermal_violation {
            Some(LimitKind::Thermal)
        } else {
            None
        }
    }
}

/// Hard limits: voltage deviation above `v_limit_frac` or current above
/// ampacity. Monitoring triggers earlier, at `monitor_v_frac` deviation or
/// `monitor_i_frac` of ampacity.
pub fn check_limits(r: &LoadFlowResult, f: &FeederModel) -> LimitStatus {
    let voltage_violation = r.max_v_dev_frac > f.v_limit_frac;
    let thermal_violation = r.max_i_frac_of_ampacity > 1.0;
    LimitStatus {
        violation: voltage_violation || thermal_violation,
        monitor_trigger: r.max_v_dev_frac >= f.monitor_v_frac || r.max_i_frac_of_ampacity > f.monitor_i_frac,
        voltage_violation,
        thermal_violation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Grow net production (negative flows); yields lower bounds.
    Injection,
    /// Grow net consumption; yields upper bounds.
    Demand,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Injection => -1.0,
            Direction::Demand => 1.0,
        }
    }
}

/// Where a household is connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub node: usize,
    pub pcc: PccId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeriveOptions {
    pub direction: Direction,
    pub step_frac: f64,
    /// Scaling stops (without violation) beyond this multiple of the baseline.
    pub max_scale: f64,
    /// Converts kW to kWh per slot.
    pub slot_hours: f64,
}

impl DeriveOptions {
    pub fn new(direction: Direction, slot_hours: f64) -> Self {
        Self {
            direction,
            step_frac: 0.02,
            max_scale: 10.0,
            slot_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstraints {
    pub constraints: ConstraintSet,
    /// Scaling iterations accepted before the first violation.
    pub steps: usize,
    /// Growth of the aggregate flow in the tested direction at the accepted iterate.
    pub scale: f64,
    /// `None` when no violation occurred within `max_scale`.
    pub binding: Option<LimitKind>,
    /// Household flows (kW) of the accepted iterate.
    pub flows_kw: Vec<f64>,
}

/// Sums household flows onto feeder nodes.
pub fn node_injections(f: &FeederModel, placements: &[Placement], flows_kw: &[f64]) -> Vec<f64> {
    let mut inj = vec![0.0; f.node_count()];
    for (pl, q) in placements.iter().zip(flows_kw) {
        inj[pl.node] += q;
    }
    inj
}

/// Household flows of scaling iterate `k`.
///
/// Households already flowing in the tested direction grow geometrically,
/// `(1 + step)^k`; the others are held. When no household flows in that
/// direction, every household receives the same increment
/// `k · step · S_transformer / H` instead.
fn iterate_flows(baseline: &[f64], opts: &DeriveOptions, transformer_kva: f64, k: i32) -> (Vec<f64>, f64) {
    let sign = opts.direction.sign();
    let active_total: f64 = baseline.iter().filter(|q| *q * sign > 0.0).map(|q| q.abs()).sum();
    if active_total > 0.0 {
        let m = (1.0 + opts.step_frac).powi(k);
        let flows = baseline
            .iter()
            .map(|&q| if q * sign > 0.0 { q * m } else { q })
            .collect();
        (flows, m)
    } else {
        let delta = opts.step_frac * transformer_kva / baseline.len().max(1) as f64;
        let flows = baseline.iter().map(|&q| q + sign * f64::from(k) * delta).collect();
        (flows, 1.0 + opts.step_frac * f64::from(k))
    }
}

fn bound_per_pcc(n_pcc: usize, placements: &[Placement], flows_kw: &[f64], slot_hours: f64) -> Vec<f64> {
    let h = placements.len().max(1) as f64;
    let mut out = vec![0.0; n_pcc];
    for (pl, q) in placements.iter().zip(flows_kw) {
        out[pl.pcc.0] += q * slot_hours / h;
    }
    out
}

fn assemble(
    f: &FeederModel,
    placements: &[Placement],
    opts: &DeriveOptions,
    flows: Option<&[f64]>,
    attainable: Option<&[Option<FeasibleInterval>]>,
) -> ConstraintSet {
    let n = f.pcc_count();
    let set_lo = |p: usize| attainable.and_then(|a| a[p]).map_or(f64::NEG_INFINITY, |iv| iv.lo);
    let set_hi = |p: usize| attainable.and_then(|a| a[p]).map_or(f64::INFINITY, |iv| iv.hi);
    let tested = flows.map(|q| bound_per_pcc(n, placements, q, opts.slot_hours));
    let (c_lo, c_hi) = match opts.direction {
        Direction::Injection => (
            (0..n).map(|p| tested.as_ref().map_or(set_lo(p), |t| t[p])).collect(),
            (0..n).map(set_hi).collect(),
        ),
        Direction::Demand => (
            (0..n).map(set_lo).collect(),
            (0..n).map(|p| tested.as_ref().map_or(set_hi(p), |t| t[p])).collect(),
        ),
    };
    ConstraintSet { c_lo, c_hi }
}

/// Grows the aggregate flow in the chosen direction step by step until the
/// load flow reports a violation, and turns the last safe iterate into
/// per-PCC bounds on the average flow (kWh per slot).
///
/// The untested side is taken from `attainable` when given, else left open.
pub fn derive_constraints(
    f: &FeederModel,
    placements: &[Placement],
    baseline_kw: &[f64],
    opts: &DeriveOptions,
    attainable: Option<&[Option<FeasibleInterval>]>,
) -> Result<DerivedConstraints, FeederError> {
    if placements.len() != baseline_kw.len() {
        return Err(FeederError::LengthMismatch {
            expected: placements.len(),
            got: baseline_kw.len(),
        });
    }
    let violates = |flows: &[f64]| -> Result<Option<LimitKind>, FeederError> {
        let r = solve_load_flow(f, &node_injections(f, placements, flows))?;
        Ok(check_limits(&r, f).binding())
    };
    if violates(baseline_kw)?.is_some() {
        return Err(FeederError::BaselineViolating);
    }
    let mut accepted = (baseline_kw.to_vec(), 1.0, 0usize);
    let mut k = 1;
    loop {
        let (flows, scale) = iterate_flows(baseline_kw, opts, f.transformer_kva, k);
        if scale > opts.max_scale {
            return Ok(DerivedConstraints {
                constraints: assemble(f, placements, opts, None, attainable),
                steps: accepted.2,
                scale: accepted.1,
                binding: None,
                flows_kw: accepted.0,
            });
        }
        if let Some(kind) = violates(&flows)? {
            return Ok(DerivedConstraints {
                constraints: assemble(f, placements, opts, Some(&accepted.0), attainable),
                steps: accepted.2,
                scale: accepted.1,
                binding: Some(kind),
                flows_kw: accepted.0,
            });
        }
        accepted = (flows, scale, k as usize);
        k += 1;
    }
}

/// Counterpart of [`derive_constraints`] for a baseline that already
/// violates: shrink the tested-direction flows one step at a time until the
/// load flow is clean and bind the constraint there.
pub fn tighten_violating_baseline(
    f: &FeederModel,
    placements: &[Placement],
    baseline_kw: &[f64],
    opts: &DeriveOptions,
    attainable: Option<&[Option<FeasibleInterval>]>,
) -> Result<DerivedConstraints, FeederError> {
    let sign = opts.direction.sign();
    let mut last = None;
    for k in 1..=400 {
        let m = (1.0 + opts.step_frac).powi(-k);
        let flows: Vec<f64> = baseline_kw
            .iter()
            .map(|&q| if q * sign > 0.0 { q * m } else { q })
            .collect();
        let r = solve_load_flow(f, &node_injections(f, placements, &flows))?;
        let status = check_limits(&r, f);
        if !status.violation {
            return Ok(DerivedConstraints {
                constraints: assemble(f, placements, opts, Some(&flows), attainable),
                steps: 0,
                scale: m,
                binding: last,
                flows_kw: flows,
            });
        }
        last = status.binding();
    }
    // Scaling the tested side away did not help; the violation is on the other side.
    let flows: Vec<f64> = baseline_kw
        .iter()
        .map(|&q| if q * sign > 0.0 { 0.0 } else { q })
        .collect();
    Ok(DerivedConstraints {
        constraints: assemble(f, placements, opts, Some(&flows), attainable),
        steps: 0,
        scale: 0.0,
        binding: last,
        flows_kw: flows,
    })
}
