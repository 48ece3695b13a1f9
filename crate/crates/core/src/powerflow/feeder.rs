use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::FeederError;
use crate::model::PccId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeederNode {
    pub id: usize,
    pub phase: u8,
    /// Physical position along the feeder; the same bus exists on every phase.
    pub bus: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcc: Option<PccId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Ω
    pub resistance: f64,
    /// Ω
    pub reactance: f64,
    /// A
    pub ampacity: f64,
}

fn default_slack_voltage() -> f64 {
    236.7
}
fn default_v_limit() -> f64 {
    0.10
}
fn default_monitor_v() -> f64 {
    0.09
}
fn default_monitor_i() -> f64 {
    0.70
}
fn default_kva() -> f64 {
    160.0
}
fn default_pf() -> f64 {
    1.0
}

/// Serialized form of a feeder; validated into a [`FeederModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSpec {
    #[serde(default = "default_slack_voltage")]
    pub slack_voltage: f64,
    #[serde(default = "default_v_limit")]
    pub v_limit_frac: f64,
    #[serde(default = "default_monitor_v")]
    pub monitor_v_frac: f64,
    #[serde(default = "default_monitor_i")]
    pub monitor_i_frac: f64,
    #[serde(default = "default_kva")]
    pub transformer_kva: f64,
    /// Load and PV power factor; unity unless configured.
    #[serde(default = "default_pf")]
    pub power_factor: f64,
    pub nodes: Vec<FeederNode>,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq)]
struct Topology {
    /// Parents always precede their children.
    order: Vec<usize>,
    line_into: Vec<Option<usize>>,
    pcc_of: Vec<Option<PccId>>,
    by_bus_phase: BTreeMap<(usize, u8), usize>,
    n_pcc: usize,
    phases: Vec<u8>,
}

/// Radial per-phase network. Each phase is a tree rooted at its own slack
/// node (the transformer secondary terminal of that phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeederSpec", into = "FeederSpec")]
pub struct FeederModel {
    pub slack_voltage: f64,
    pub v_limit_frac: f64,
    pub monitor_v_frac: f64,
    pub monitor_i_frac: f64,
    pub transformer_kva: f64,
    pub power_factor: f64,
    nodes: Vec<FeederNode>,
    lines: Vec<Line>,
    topo: Topology,
}

impl TryFrom<FeederSpec> for FeederModel {
    type Error = FeederError;

    fn try_from(spec: FeederSpec) -> Result<Self, Self::Error> {
        Self::new(spec)
    }
}

impl From<FeederModel> for FeederSpec {
    fn from(f: FeederModel) -> Self {
        FeederSpec {
            slack_voltage: f.slack_voltage,
            v_limit_frac: f.v_limit_frac,
            monitor_v_frac: f.monitor_v_frac,
            monitor_i_frac: f.monitor_i_frac,
            transformer_kva: f.transformer_kva,
            power_factor: f.power_factor,
            nodes: f.nodes,
            lines: f.lines,
        }
    }
}

impl FeederModel {
    pub fn new(spec: FeederSpec) -> Result<Self, FeederError> {
        let invalid = |m: String| Err(FeederError::Invalid(m));
        if !(spec.slack_voltage > 0.0) {
            return invalid(format!("slack voltage must be positive (got {})", spec.slack_voltage));
        }
        if !(0.0 < spec.monitor_v_frac && spec.monitor_v_frac < spec.v_limit_frac) {
            return invalid(format!(
                "need 0 < monitor_v_frac < v_limit_frac (got {}, {})",
                spec.monitor_v_frac, spec.v_limit_frac
            ));
        }
        if !(0.0 < spec.monitor_i_frac && spec.monitor_i_frac <= 1.0) {
            return invalid(format!(
                "monitor_i_frac must lie in (0, 1] (got {})",
                spec.monitor_i_frac
            ));
        }
        if !(spec.power_factor > 0.0 && spec.power_factor <= 1.0) {
            return invalid(format!("power factor must lie in (0, 1] (got {})", spec.power_factor));
        }
        let n = spec.nodes.len();
        if n == 0 {
            return invalid("feeder has no nodes".into());
        }

        let mut by_bus_phase = BTreeMap::new();
        for (idx, node) in spec.nodes.iter().enumerate() {
            if node.id != idx {
                return invalid(format!(
                    "node ids must be 0..n in order (position {idx} has id {})",
                    node.id
                ));
            }
            if let Some(p) = node.parent {
                if p >= n || p == idx {
                    return invalid(format!("node {idx} has invalid parent {p}"));
                }
                if spec.nodes[p].phase != node.phase {
                    return invalid(format!("node {idx} and its parent {p} are on different phases"));
                }
            }
            if by_bus_phase.insert((node.bus, node.phase), idx).is_some() {
                return invalid(format!("two nodes share bus {} on phase {}", node.bus, node.phase));
            }
        }

        let mut line_into = vec![None; n];
        for (li, line) in spec.lines.iter().enumerate() {
            if line.from >= n || line.to >= n {
                return invalid(format!("line {li} references an unknown node"));
            }
            if !(line.ampacity > 0.0) {
                return invalid(format!("line {li} ampacity must be positive"));
            }
            if !(line.resistance >= 0.0) || line.resistance.hypot(line.reactance) <= 0.0 {
                return invalid(format!("line {li} needs a non-zero impedance"));
            }
            if spec.nodes[line.to].parent != Some(line.from) {
                return Err(FeederError::NonRadial(format!(
                    "line {li} ({} -> {}) does not follow the parent relation",
                    line.from, line.to
                )));
            }
            if line_into[line.to].replace(li).is_some() {
                return Err(FeederError::NonRadial(format!("node {} is fed by two lines", line.to)));
            }
        }
        for (idx, node) in spec.nodes.iter().enumerate() {
            if node.parent.is_some() && line_into[idx].is_none() {
                return invalid(format!("node {idx} has a parent but no feeding line"));
            }
        }

        // Breadth-first from the roots; anything unreached sits on a cycle.
        let mut children = vec![Vec::new(); n];
        for (idx, node) in spec.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                children[p].push(idx);
            }
        }
        let mut order: Vec<usize> = (0..n).filter(|&i| spec.nodes[i].parent.is_none()).collect();
        if order.is_empty() {
            return Err(FeederError::NonRadial("no slack root".into()));
        }
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            order.extend(children[node].iter().copied());
            head += 1;
        }
        if order.len() != n {
            return Err(FeederError::NonRadial("parent relation contains a cycle".into()));
        }

        let mut pcc_of = vec![None; n];
        for &node in &order {
            pcc_of[node] = spec.nodes[node]
                .pcc
                .or_else(|| spec.nodes[node].parent.and_then(|p| pcc_of[p]));
        }
        let mut pcc_ids: Vec<usize> = spec.nodes.iter().filter_map(|n| n.pcc.map(|p| p.0)).collect();
        pcc_ids.sort_unstable();
        if pcc_ids.iter().enumerate().any(|(i, &p)| i != p) {
            return invalid("PCC ids must be unique and numbered 0..N".into());
        }
        let mut phases: Vec<u8> = spec.nodes.iter().map(|n| n.phase).collect();
        phases.sort_unstable();
        phases.dedup();

        Ok(Self {
            slack_voltage: spec.slack_voltage,
            v_limit_frac: spec.v_limit_frac,
            monitor_v_frac: spec.monitor_v_frac,
            monitor_i_frac: spec.monitor_i_frac,
            transformer_kva: spec.transformer_kva,
            power_factor: spec.power_factor,
            topo: Topology {
                order,
                line_into,
                pcc_of,
                by_bus_phase,
                n_pcc: pcc_ids.len(),
                phases,
            },
            nodes: spec.nodes,
            lines: spec.lines,
        })
    }

    /// A uniform radial feeder: `buses` segments per phase, one PCC at each
    /// phase head, identical line parameters on every segment.
    pub fn uniform(phases: u8, buses: usize, segment: Line) -> Result<Self, FeederError> {
        let mut nodes = Vec::new();
        let mut lines = Vec::new();
        for phase in 0..phases {
            let root = nodes.len();
            nodes.push(FeederNode {
                id: root,
                phase,
                bus: 0,
                parent: None,
                pcc: Some(PccId(usize::from(phase))),
            });
            for bus in 1..=buses {
                let id = nodes.len();
                nodes.push(FeederNode {
                    id,
                    phase,
                    bus,
                    parent: Some(id - 1),
                    pcc: None,
                });
                lines.push(Line {
                    from: id - 1,
                    to: id,
                    ..segment
                });
            }
        }
        Self::new(FeederSpec {
            slack_voltage: default_slack_voltage(),
            v_limit_frac: default_v_limit(),
            monitor_v_frac: default_monitor_v(),
            monitor_i_frac: default_monitor_i(),
            transformer_kva: default_kva(),
            power_factor: default_pf(),
            nodes,
            lines,
        })
    }

    pub fn nodes(&self) -> &[FeederNode] {
        &self.nodes
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn pcc_count(&self) -> usize {
        self.topo.n_pcc
    }

    /// Distinct phase labels, ascending.
    pub fn phases(&self) -> &[u8] {
        &self.topo.phases
    }

    pub fn node_at(&self, bus: usize, phase: u8) -> Result<usize, FeederError> {
        self.topo
            .by_bus_phase
            .get(&(bus, phase))
            .copied()
            .ok_or(FeederError::UnknownNode { bus, phase })
    }

    /// Nearest PCC at or above `node`.
    pub fn pcc_of(&self, node: usize) -> Option<PccId> {
        self.topo.pcc_of.get(node).copied().flatten()
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.topo.order
    }

    pub(crate) fn line_into(&self, node: usize) -> Option<usize> {
        self.topo.line_into[node]
    }

    /// Reactive/active ratio implied by the configured power factor.
    pub(crate) fn q_ratio(&self) -> f64 {
        let pf = self.power_factor;
        (1.0 - pf * pf).max(0.0).sqrt() / pf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg() -> Line {
        Line {
            from: 0,
            to: 0,
            resistance: 0.03,
            reactance: 0.005,
            ampacity: 200.0,
        }
    }

    #[test]
    fn uniform_feeder_shape() {
        let f = FeederModel::uniform(3, 4, seg()).unwrap();
        assert_eq!(f.node_count(), 15);
        assert_eq!(f.lines().len(), 12);
        assert_eq!(f.pcc_count(), 3);
        let n = f.node_at(4, 2).unwrap();
        assert_eq!(f.pcc_of(n), Some(PccId(2)));
        assert_eq!(f.phases(), &[0, 1, 2]);
    }

    #[test]
    fn rejects_line_not_following_parent() {
        let f = FeederModel::uniform(1, 3, seg()).unwrap();
        let mut spec: FeederSpec = f.into();
        // A loop-closing tie line from node 1 to node 3.
        spec.lines.push(Line {
            from: 1,
            to: 3,
            ..seg()
        });
        assert!(matches!(FeederModel::new(spec), Err(FeederError::NonRadial(_))));
    }

    #[test]
    fn rejects_cycles() {
        let f = FeederModel::uniform(1, 2, seg()).unwrap();
        let mut spec: FeederSpec = f.into();
        spec.nodes[0].parent = Some(2);
        spec.lines.push(Line {
            from: 2,
            to: 0,
            ..seg()
        });
        assert!(FeederModel::new(spec).is_err());
    }

    #[test]
    fn rejects_bad_thresholds() {
        let f = FeederModel::uniform(1, 2, seg()).unwrap();
        let mut spec: FeederSpec = f.into();
        spec.monitor_v_frac = 0.12;
        assert!(matches!(FeederModel::new(spec), Err(FeederError::Invalid(_))));
    }
}
