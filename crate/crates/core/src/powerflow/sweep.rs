use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FeederModel;
use crate::error::FeederError;

pub const SWEEP_TOLERANCE_PU: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadFlowResult {
    /// Voltage magnitude per node, V.
    pub node_voltages: Vec<f64>,
    /// Current magnitude per line, A (same order as the feeder's lines).
    pub line_currents: Vec<f64>,
    pub max_v_dev_frac: f64,
    pub max_i_frac_of_ampacity: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest per-node complex power mismatch, in p.u. of the transformer rating.
    pub max_mismatch_pu: f64,
    /// Active power delivered by the slack nodes, kW.
    pub slack_kw: f64,
    /// Active losses on all lines, kW.
    pub losses_kw: f64,
}

/// Backward/forward sweep load flow.
///
/// `injections_kw[n]` is the constant active power drawn at node `n`
/// (positive = consumption, negative = production); reactive power follows
/// the feeder's power factor.
pub fn solve_load_flow(f: &FeederModel, injections_kw: &[f64]) -> Result<LoadFlowResult, FeederError> {
    let n = f.node_count();
    if injections_kw.len() != n {
        return Err(FeederError::LengthMismatch {
            expected: n,
            got: injections_kw.len(),
        });
    }
    let un = f.slack_voltage;
    let q_ratio = f.q_ratio();
    let power: Vec<Complex64> = injections_kw
        .iter()
        .map(|&p| Complex64::new(p * 1e3, p * 1e3 * q_ratio))
        .collect();
    let impedance: Vec<Complex64> = f
        .lines()
        .iter()
        .map(|l| Complex64::new(l.resistance, l.reactance))
        .collect();
    let nodes = f.nodes();
    let order = f.order();

    let mut v = vec![Complex64::new(un, 0.0); n];
    let mut branch = vec![Complex64::new(0.0, 0.0); n];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=MAX_SWEEPS {
        iterations = it;
        backward(&power, &v, nodes, order, &mut branch);
        let mut max_dv: f64 = 0.0;
        for &node in order {
            let new = match nodes[node].parent {
                None => Complex64::new(un, 0.0),
                Some(p) => {
                    let li = f.line_into(node).expect("validated: every child has a feeding line");
                    v[p] - impedance[li] * branch[node]
                }
            };
            max_dv = max_dv.max((new - v[node]).norm());
            v[node] = new;
        }
        if max_dv / un < SWEEP_TOLERANCE_PU {
            converged = true;
            break;
        }
    }
    backward(&power, &v, nodes, order, &mut branch);

    // Mismatch from KVL currents on the final voltages.
    let mut line_flow = vec![Complex64::new(0.0, 0.0); n];
    for (li, line) in f.lines().iter().enumerate() {
        line_flow[line.to] = (v[line.from] - v[line.to]) / impedance[li];
    }
    let mut net_current = line_flow.clone();
    for (node, info) in nodes.iter().enumerate() {
        if let Some(p) = info.parent {
            net_current[p] -= line_flow[node];
        }
    }
    let s_base = f.transformer_kva * 1e3;
    let mut max_mismatch: f64 = 0.0;
    for node in 0..n {
        if nodes[node].parent.is_none() {
            continue;
        }
        let s_calc = v[node] * net_current[node].conj();
        max_mismatch = max_mismatch.max((s_calc - power[node]).norm() / s_base);
    }

    let line_currents: Vec<f64> = f.lines().iter().map(|l| branch[l.to].norm()).collect();
    let losses_kw = f
        .lines()
        .iter()
        .zip(&line_currents)
        .map(|(l, i)| l.resistance * i * i)
        .sum::<f64>()
        / 1e3;
    let slack_kw = order
        .iter()
        .filter(|&&node| nodes[node].parent.is_none())
        .map(|&node| (v[node] * branch[node].conj()).re)
        .sum::<f64>()
        / 1e3;
    let node_voltages: Vec<f64> = v.iter().map(|x| x.norm()).collect();
    let max_v_dev_frac = node_voltages.iter().map(|vm| (vm - un).abs() / un).fold(0.0, f64::max);
    let max_i_frac_of_ampacity = f
        .lines()
        .iter()
        .zip(&line_currents)
        .map(|(l, i)| i / l.ampacity)
        .fold(0.0, f64::max);

    Ok(LoadFlowResult {
        node_voltages,
        line_currents,
        max_v_dev_frac,
        max_i_frac_of_ampacity,
        converged,
        iterations,
        max_mismatch_pu: max_mismatch,
        slack_kw,
        losses_kw,
    })
}

/// Node currents from the current voltages, accumulated leaf to root.
fn backward(
    power: &[Complex64],
    v: &[Complex64],
    nodes: &[super::FeederNode],
    order: &[usize],
    branch: &mut [Complex64],
) {
    for (node, b) in branch.iter_mut().enumerate() {
        *b = (power[node] / v[node]).conj();
    }
    for &node in order.iter().rev() {
        if let Some(p) = nodes[node].parent {
            let flow = branch[node];
            branch[p] += flow;
        }
    }
}
