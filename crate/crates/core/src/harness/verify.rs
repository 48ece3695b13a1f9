//! Post-hoc checks on a run directory: battery continuity and, for every
//! coordinated slot, the equilibrium conditions recomputed from the scenario.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::outputs::{
    csv_error, EquilibriumRow, HouseholdRow, Manifest, SlotRow, EQUILIBRIA_CSV, HOUSEHOLDS_CSV, MANIFEST_JSON,
    SLOTS_CSV,
};
use crate::coordinator::{verify_equilibrium, ConstraintSet, ControlSignal};
use crate::error::{Error, Result};
use crate::model::{load_scenario, PccId, Strategy};

/// Largest admissible regret of a converged slot, €.
pub const REGRET_TOLERANCE: f64 = 1e-4;
const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerifyReport {
    pub households: usize,
    pub slots: usize,
    pub equilibria_checked: usize,
    pub max_regret: f64,
    pub max_constraint_violation: f64,
    pub non_converged_slots: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(&path, e))).collect()
}

/// Re-checks a run directory written by `write_outputs`.
///
/// I/O problems are returned as errors; failed checks are listed in the report.
pub fn verify_run(dir: &Path) -> Result<VerifyReport> {
    let manifest_path = dir.join(MANIFEST_JSON);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Verification(format!("{}: {e}", manifest_path.display())))?;
    let households: Vec<HouseholdRow> = read_rows(dir, HOUSEHOLDS_CSV)?;
    let slots: Vec<SlotRow> = read_rows(dir, SLOTS_CSV)?;
    let equilibria: Vec<EquilibriumRow> = read_rows(dir, EQUILIBRIA_CSV)?;

    let mut report = VerifyReport {
        slots: slots.len(),
        ..VerifyReport::default()
    };

    let mut by_household: BTreeMap<u32, Vec<&HouseholdRow>> = BTreeMap::new();
    for r in &households {
        by_household.entry(r.household).or_default().push(r);
    }
    report.households = by_household.len();
    for (id, rows) in &by_household {
        for r in rows {
            if !(r.e_min - ENERGY_TOLERANCE <= r.e0 && r.e0 <= r.e_max + ENERGY_TOLERANCE) {
                report.failures.push(format!(
                    "household {id} slot {}: e0 {} outside [{}, {}]",
                    r.slot, r.e0, r.e_min, r.e_max
                ));
            }
            let after = r.e0 - r.s;
            if !(r.e_min - ENERGY_TOLERANCE <= after && after <= r.e_max + ENERGY_TOLERANCE) {
                report.failures.push(format!(
                    "household {id} slot {}: energy {after} after the slot is out of bounds",
                    r.slot
                ));
            }
        }
        for w in rows.windows(2) {
            if w[1].slot != w[0].slot + 1 {
                report
                    .failures
                    .push(format!("household {id}: slot {} follows {}", w[1].slot, w[0].slot));
            } else if (w[1].e0 - (w[0].e0 - w[0].s)).abs() > ENERGY_TOLERANCE {
                report.failures.push(format!(
                    "household {id} slot {}: e0 {} but previous slot leaves {}",
                    w[1].slot,
                    w[1].e0,
                    w[0].e0 - w[0].s
                ));
            }
        }
    }

    let coordinated: Vec<&SlotRow> = slots.iter().filter(|s| s.rtc_active).collect();
    report.non_converged_slots = coordinated.iter().filter(|s| s.converged != Some(true)).count();
    if coordinated.is_empty() {
        return Ok(report);
    }
    let Some(scenario_path) = manifest.scenario.as_ref() else {
        report
            .failures
            .push("manifest names no scenario; equilibria cannot be re-checked".into());
        return Ok(report);
    };
    let scenario = load_scenario(scenario_path)?;
    let index_of: BTreeMap<u32, usize> = scenario.households.iter().enumerate().map(|(i, h)| (h.id, i)).collect();
    let n_pcc = scenario.n_pcc();
    let mut eq_by_slot: BTreeMap<usize, Vec<&EquilibriumRow>> = BTreeMap::new();
    for e in &equilibria {
        eq_by_slot.entry(e.slot).or_default().push(e);
    }
    let mut hh_by_slot: BTreeMap<usize, Vec<&HouseholdRow>> = BTreeMap::new();
    for r in &households {
        hh_by_slot.entry(r.slot).or_default().push(r);
    }

    for slot in coordinated {
        let (Some(eq), Some(rows)) = (eq_by_slot.get(&slot.slot), hh_by_slot.get(&slot.slot)) else {
            report
                .failures
                .push(format!("slot {}: coordination records missing", slot.slot));
            continue;
        };
        if eq.len() != n_pcc {
            report
                .failures
                .push(format!("slot {}: {} PCC rows, expected {n_pcc}", slot.slot, eq.len()));
            continue;
        }
        let mut states = Vec::with_capacity(rows.len());
        let mut strategies = Vec::with_capacity(rows.len());
        for r in rows {
            let Some(&idx) = index_of.get(&r.household) else {
                report
                    .failures
                    .push(format!("slot {}: unknown household {}", slot.slot, r.household));
                continue;
            };
            let mut st = scenario.household_state(idx, r.slot, r.e0);
            st.pcc = PccId(r.pcc);
            strategies.push(Strategy::balanced(st.pcc, st.r, r.x));
            states.push(st);
        }
        let mut sig = ControlSignal::zeros(n_pcc);
        let mut c = ConstraintSet::unbounded(n_pcc);
        for e in eq {
            sig.u[e.pcc] = e.u;
            sig.lambda_up[e.pcc] = e.lambda_up;
            sig.lambda_dn[e.pcc] = e.lambda_dn;
            c.c_lo[e.pcc] = e.c_lo;
            c.c_hi[e.pcc] = e.c_hi;
        }
        let cfg = manifest.params.coordinator(&states, &scenario);
        let rep = verify_equilibrium(&strategies, &sig, &states, &cfg, &c);
        report.equilibria_checked += 1;
        if slot.converged == Some(true) {
            report.max_regret = report.max_regret.max(rep.max_regret);
            report.max_constraint_violation = report.max_constraint_violation.max(rep.constraint_violation);
            if rep.max_regret > REGRET_TOLERANCE {
                report.failures.push(format!(
                    "slot {}: regret {} exceeds {REGRET_TOLERANCE}",
                    slot.slot, rep.max_regret
                ));
            }
            if rep.constraint_violation > cfg.tol_c {
                report.failures.push(format!(
                    "slot {}: average flow violates the bounds by {}",
                    slot.slot, rep.constraint_violation
                ));
            }
        }
    }
    Ok(report)
}
