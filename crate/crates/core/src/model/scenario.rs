//! Scenario documents: a TOML file describing slots, households and the
//! feeder, with per-slot profiles and market commitments either inline or in
//! sibling CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BatteryParams, HouseholdState, MarketCommitment, PccId, PriceParams, SlotConfig};
use crate::error::ScenarioError;
use crate::powerflow::FeederModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlexKind {
    Battery,
    /// Elastic appliances modelled as a small symmetric battery with `b = 0`.
    FlexibleLoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub e_max: f64,
    pub e_min: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub a: f64,
    pub b: f64,
    /// Stored energy at the start of the horizon.
    pub e_init: f64,
    /// Daily energy available to real-time control in each direction.
    pub extra_cycle_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceConfig {
    pub p_f: f64,
    pub a_r: f64,
    /// Slot reward as a fraction of the neighbour-traded value `|x_hat_m| * p_m`.
    pub reward_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotProfile {
    pub load_kwh: f64,
    pub pv_kwh: f64,
}

/// Cycling bounds on the battery flow of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleBudget {
    pub up: f64,
    pub dn: f64,
}

/// Supplier price over `[start_slot, end_slot)` of every day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouBand {
    pub start_slot: u32,
    pub end_slot: u32,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TouSchedule(pub Vec<TouBand>);

impl TouSchedule {
    pub fn price_at(&self, slot_of_day: u32) -> Option<f64> {
        self.0
            .iter()
            .find(|b| b.start_slot <= slot_of_day && slot_of_day < b.end_slot)
            .map(|b| b.price)
    }
}

/// Daily slot range in which load flows are monitored and control may start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringWindow {
    pub start: u32,
    pub end: u32,
}

impl Default for MonitoringWindow {
    fn default() -> Self {
        // 10:00 to 14:00 with 10-minute slots.
        Self { start: 60, end: 84 }
    }
}

impl MonitoringWindow {
    pub fn contains(&self, slot_of_day: u32) -> bool {
        self.start <= slot_of_day && slot_of_day < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub id: u32,
    pub pcc: PccId,
    pub bus: usize,
    pub phase: u8,
    pub switchable: bool,
    pub x_bar: f64,
    pub kind: FlexKind,
    pub battery: BatteryConfig,
    pub prices: PriceConfig,
    pub profile: Vec<SlotProfile>,
    pub commitments: Vec<MarketCommitment>,
    /// Derived at ingestion from the commitments and the feeder-wide PV forecast.
    #[serde(skip)]
    pub cycling: Vec<CycleBudget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub horizon: usize,
    pub slots: SlotConfig,
    pub monitoring_window: MonitoringWindow,
    pub tou_schedule: TouSchedule,
    pub households: Vec<Household>,
    pub feeder: FeederModel,
}

impl Scenario {
    pub fn n_pcc(&self) -> usize {
        self.feeder.pcc_count()
    }

    pub fn slot_of_day(&self, slot: usize) -> u32 {
        (slot % self.slots.slots_per_day as usize) as u32
    }

    /// Supplier price at an absolute slot index.
    pub fn supplier_price(&self, slot: usize) -> f64 {
        self.tou_schedule
            .price_at(self.slot_of_day(slot))
            .expect("validated scenario covers every slot of the day")
    }

    /// Builds the state of household `idx` at `slot` from the stored battery
    /// energy `e0`; the gap forecast follows from the commitment balance
    /// `x_hat + s_hat = r_hat`.
    pub fn household_state(&self, idx: usize, slot: usize, e0: f64) -> HouseholdState {
        let h = &self.households[idx];
        let c = h.commitments[slot];
        let prof = h.profile[slot];
        let cyc = h.cycling[slot];
        let r_hat = c.x_hat + c.s_hat;
        let r = prof.load_kwh - prof.pv_kwh;
        HouseholdState {
            id: h.id,
            pcc: h.pcc,
            r_hat,
            r_tilde: r - r_hat,
            r,
            e0,
            x_0k: 0.0,
            s_0k: 0.0,
            x_bar: h.x_bar,
            commitment: c,
            battery: BatteryParams {
                e_max: h.battery.e_max,
                e_min: h.battery.e_min,
                s_max: h.battery.s_max,
                s_min: h.battery.s_min,
                cyc_up: cyc.up,
                cyc_dn: cyc.dn,
                a: h.battery.a,
                b: h.battery.b,
            },
            prices: PriceParams {
                p_u: self.supplier_price(slot),
                p_f: h.prices.p_f,
                a_r: h.prices.a_r,
                reward: h.prices.reward_frac * c.x_hat_m.abs() * c.p_m,
            },
        }
    }

    /// Recomputes the per-slot cycling budgets.
    ///
    /// Each day the real-time budget `extra_cycle_kwh` is spread over the
    /// slots in proportion to the day-ahead (persistence) forecast of the
    /// feeder's total PV production; the first day uses its own profile.
    /// Scheduled battery use is always admissible on top of that.
    pub fn derive_cycling(&mut self) {
        let spd = self.slots.slots_per_day as usize;
        let horizon = self.horizon;
        let total_pv: Vec<f64> = (0..horizon)
            .map(|t| self.households.iter().map(|h| h.profile[t].pv_kwh).sum())
            .collect();
        let forecast: Vec<f64> = (0..horizon)
            .map(|t| if t >= spd { total_pv[t - spd] } else { total_pv[t] })
            .collect();
        let n_days = horizon.div_ceil(spd);
        let mut weights = vec![0.0; horizon];
        for day in 0..n_days {
            let range = day * spd..((day + 1) * spd).min(horizon);
            let sum: f64 = forecast[range.clone()].iter().sum();
            for t in range {
                weights[t] = if sum > 0.0 { forecast[t] / sum } else { 1.0 / spd as f64 };
            }
        }
        for h in &mut self.households {
            h.cycling = h
                .commitments
                .iter()
                .zip(&weights)
                .map(|(c, w)| {
                    let extra = h.battery.extra_cycle_kwh * w;
                    CycleBudget {
                        up: c.s_hat.max(0.0) + extra,
                        dn: c.s_hat.min(0.0) - extra,
                    }
                })
                .collect();
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.slots.validate().map_err(|m| ScenarioError::invalid("slots", m))?;
        if self.horizon == 0 {
            return Err(ScenarioError::invalid("horizon", "must be at least one slot"));
        }
        let spd = self.slots.slots_per_day;
        if self.monitoring_window.start > self.monitoring_window.end || self.monitoring_window.end > spd {
            return Err(ScenarioError::invalid("monitoring", "window must lie within one day"));
        }
        for sod in 0..spd {
            match self.tou_schedule.price_at(sod) {
                Some(p) if p > 0.0 => {}
                _ => {
                    return Err(ScenarioError::invalid(
                        "tou",
                        format!("slot {sod} of the day has no positive supplier price"),
                    ))
                }
            }
        }
        if self.households.is_empty() {
            return Err(ScenarioError::invalid(
                "households",
                "at least one household is required",
            ));
        }
        let mut ids: Vec<u32> = self.households.iter().map(|h| h.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScenarioError::invalid("households", "duplicate household id"));
        }

        for (idx, h) in self.households.iter().enumerate() {
            let err = |field: &str, m: String| ScenarioError::household(h.id, field, m);
            if h.pcc.0 >= self.n_pcc() {
                return Err(err("pcc", format!("{} does not exist on the feeder", h.pcc)));
            }
            let node = self
                .feeder
                .node_at(h.bus, h.phase)
                .map_err(|e| err("bus", e.to_string()))?;
            if self.feeder.pcc_of(node) != Some(h.pcc) {
                return Err(err(
                    "pcc",
                    format!("bus {} phase {} is not below {}", h.bus, h.phase, h.pcc),
                ));
            }
            if h.profile.len() != self.horizon {
                return Err(err(
                    "profile",
                    format!("{} slots, expected {}", h.profile.len(), self.horizon),
                ));
            }
            if h.commitments.len() != self.horizon {
                return Err(err(
                    "commitments",
                    format!("{} slots, expected {}", h.commitments.len(), self.horizon),
                ));
            }
            if h.kind == FlexKind::FlexibleLoad && h.battery.b != 0.0 {
                return Err(err(
                    "battery.b",
                    "flexible loads carry no linear degradation term".into(),
                ));
            }
            if !(h.battery.extra_cycle_kwh >= 0.0) {
                return Err(err("battery.extra_cycle_kwh", "must be non-negative".into()));
            }
            if !(h.prices.reward_frac >= 0.0) {
                return Err(err("prices.reward_frac", "must be non-negative".into()));
            }
            for slot in 0..self.horizon {
                let c = &h.commitments[slot];
                if !c.is_consistent() {
                    return Err(err(
                        "x_hat",
                        format!(
                            "slot {slot}: x_hat {} differs from x_hat_m + x_hat_u = {}",
                            c.x_hat,
                            c.x_hat_m + c.x_hat_u
                        ),
                    ));
                }
                let p = &h.profile[slot];
                if !(p.load_kwh.is_finite() && p.pv_kwh.is_finite()) {
                    return Err(err("profile", format!("slot {slot} has non-finite values")));
                }
            }
            if h.cycling.len() == self.horizon {
                let state = self.household_state(idx, 0, h.battery.e_init);
                state.validate().map_err(|(f, m)| err(&f, m))?;
                for slot in 1..self.horizon {
                    let c = &h.commitments[slot];
                    let p_u = self.supplier_price(slot);
                    if !(h.prices.p_f < c.p_m && c.p_m < p_u) {
                        return Err(err(
                            "prices",
                            format!(
                                "slot {slot}: expected p_f < p_m < p_u, got {} / {} / {}",
                                h.prices.p_f, c.p_m, p_u
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the scenario as `path` plus `<stem>.profiles.csv` and
    /// `<stem>.commitments.csv` next to it.
    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string();
        let profiles_name = format!("{stem}.profiles.csv");
        let commitments_name = format!("{stem}.commitments.csv");

        let doc = ScenarioDoc {
            horizon: self.horizon,
            profiles: Some(profiles_name.clone()),
            commitments: Some(commitments_name.clone()),
            slots: self.slots,
            monitoring: self.monitoring_window,
            tou: self.tou_schedule.0.clone(),
            households: self
                .households
                .iter()
                .map(|h| HouseholdDoc {
                    id: h.id,
                    pcc: h.pcc,
                    bus: h.bus,
                    phase: h.phase,
                    switchable: h.switchable,
                    x_bar: h.x_bar,
                    kind: h.kind,
                    battery: h.battery,
                    prices: h.prices,
                    profile: Vec::new(),
                    commitments: Vec::new(),
                })
                .collect(),
            feeder: self.feeder.clone(),
        };
        let text = toml::to_string(&doc).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(path, text).map_err(|e| io_err(path, e))?;

        let profiles_path = dir.join(&profiles_name);
        let mut w = csv::Writer::from_path(&profiles_path).map_err(|e| csv_err(&profiles_path, e))?;
        for slot in 0..self.horizon {
            for h in &self.households {
                let p = h.profile[slot];
                w.serialize(ProfileCsvRow {
                    slot,
                    household: h.id,
                    load_kwh: p.load_kwh,
                    pv_kwh: p.pv_kwh,
                })
                .map_err(|e| csv_err(&profiles_path, e))?;
            }
        }
        w.flush().map_err(|e| io_err(&profiles_path, e))?;

        let commitments_path = dir.join(&commitments_name);
        let mut w = csv::Writer::from_path(&commitments_path).map_err(|e| csv_err(&commitments_path, e))?;
        for slot in 0..self.horizon {
            for h in &self.households {
                let c = h.commitments[slot];
                w.serialize(CommitmentCsvRow {
                    slot,
                    household: h.id,
                    x_hat_m: c.x_hat_m,
                    x_hat_u: c.x_hat_u,
                    x_hat: c.x_hat,
                    p_m: c.p_m,
                    s_hat: c.s_hat,
                })
                .map_err(|e| csv_err(&commitments_path, e))?;
            }
        }
        w.flush().map_err(|e| io_err(&commitments_path, e))?;
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> ScenarioError {
    ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioDoc {
    horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiles: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    commitments: Option<String>,
    #[serde(default)]
    slots: SlotConfig,
    #[serde(default)]
    monitoring: MonitoringWindow,
    tou: Vec<TouBand>,
    households: Vec<HouseholdDoc>,
    feeder: FeederModel,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct HouseholdDoc {
    id: u32,
    pcc: PccId,
    bus: usize,
    phase: u8,
    #[serde(default = "yes")]
    switchable: bool,
    x_bar: f64,
    kind: FlexKind,
    battery: BatteryConfig,
    prices: PriceConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    profile: Vec<InlineProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    commitments: Vec<InlineCommitment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InlineProfile {
    slot: usize,
    load_kwh: f64,
    pv_kwh: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InlineCommitment {
    slot: usize,
    x_hat_m: f64,
    x_hat_u: f64,
    x_hat: f64,
    p_m: f64,
    s_hat: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileCsvRow {
    slot: usize,
    household: u32,
    load_kwh: f64,
    pv_kwh: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CommitmentCsvRow {
    slot: usize,
    household: u32,
    x_hat_m: f64,
    x_hat_u: f64,
    x_hat: f64,
    p_m: f64,
    s_hat: f64,
}

/// Places `value` at `slot` of household `id`, rejecting duplicates and
/// out-of-range slots.
fn place<T>(
    table: &mut [Vec<Option<T>>],
    index_of: &impl Fn(u32) -> Option<usize>,
    id: u32,
    slot: usize,
    value: T,
    what: &str,
) -> Result<(), ScenarioError> {
    let idx =
        index_of(id).ok_or_else(|| ScenarioError::invalid(what, format!("row references unknown household {id}")))?;
    let cell = table[idx]
        .get_mut(slot)
        .ok_or_else(|| ScenarioError::household(id, what, format!("slot {slot} beyond horizon")))?;
    if cell.replace(value).is_some() {
        return Err(ScenarioError::household(id, what, format!("slot {slot} given twice")));
    }
    Ok(())
}

fn complete<T>(table: Vec<Vec<Option<T>>>, ids: &[u32], what: &str) -> Result<Vec<Vec<T>>, ScenarioError> {
    table
        .into_iter()
        .zip(ids)
        .map(|(row, &id)| {
            row.into_iter()
                .enumerate()
                .map(|(slot, v)| v.ok_or_else(|| ScenarioError::household(id, what, format!("slot {slot} missing"))))
                .collect()
        })
        .collect()
}

/// Reads and validates a scenario document.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let doc: ScenarioDoc = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    from_document(doc, &base)
}

fn from_document(doc: ScenarioDoc, base: &Path) -> Result<Scenario, ScenarioError> {
    let horizon = doc.horizon;
    let ids: Vec<u32> = doc.households.iter().map(|h| h.id).collect();
    let index_of = |id: u32| ids.iter().position(|&x| x == id);
    let mut profiles: Vec<Vec<Option<SlotProfile>>> = vec![vec![None; horizon]; ids.len()];
    let mut commitments: Vec<Vec<Option<MarketCommitment>>> = vec![vec![None; horizon]; ids.len()];

    for h in &doc.households {
        for p in &h.profile {
            let v = SlotProfile {
                load_kwh: p.load_kwh,
                pv_kwh: p.pv_kwh,
            };
            place(&mut profiles, &index_of, h.id, p.slot, v, "profile")?;
        }
        for c in &h.commitments {
            let v = MarketCommitment {
                x_hat_m: c.x_hat_m,
                x_hat_u: c.x_hat_u,
                p_m: c.p_m,
                s_hat: c.s_hat,
                x_hat: c.x_hat,
            };
            place(&mut commitments, &index_of, h.id, c.slot, v, "commitments")?;
        }
    }
    if let Some(rel) = &doc.profiles {
        let p = base.join(rel);
        let mut rdr = csv::Reader::from_path(&p).map_err(|e| csv_err(&p, e))?;
        for row in rdr.deserialize::<ProfileCsvRow>() {
            let row = row.map_err(|e| csv_err(&p, e))?;
            let v = SlotProfile {
                load_kwh: row.load_kwh,
                pv_kwh: row.pv_kwh,
            };
            place(&mut profiles, &index_of, row.household, row.slot, v, "profile")?;
        }
    }
    if let Some(rel) = &doc.commitments {
        let p = base.join(rel);
        let mut rdr = csv::Reader::from_path(&p).map_err(|e| csv_err(&p, e))?;
        for row in rdr.deserialize::<CommitmentCsvRow>() {
            let row = row.map_err(|e| csv_err(&p, e))?;
            let v = MarketCommitment {
                x_hat_m: row.x_hat_m,
                x_hat_u: row.x_hat_u,
                p_m: row.p_m,
                s_hat: row.s_hat,
                x_hat: row.x_hat,
            };
            place(&mut commitments, &index_of, row.household, row.slot, v, "commitments")?;
        }
    }
    let profiles = complete(profiles, &ids, "profile")?;
    let commitments = complete(commitments, &ids, "commitments")?;

    let households = doc
        .households
        .into_iter()
        .zip(profiles.into_iter().zip(commitments))
        .map(|(h, (profile, commitments))| Household {
            id: h.id,
            pcc: h.pcc,
            bus: h.bus,
            phase: h.phase,
            switchable: h.switchable,
            x_bar: h.x_bar,
            kind: h.kind,
            battery: h.battery,
            prices: h.prices,
            profile,
            commitments,
            cycling: Vec::new(),
        })
        .collect();

    let mut scenario = Scenario {
        horizon,
        slots: doc.slots,
        monitoring_window: doc.monitoring,
        tou_schedule: TouSchedule(doc.tou),
        households,
        feeder: doc.feeder,
    };
    // Structural checks first so cycling derivation can index safely.
    scenario.horizon_check()?;
    scenario.derive_cycling();
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    fn horizon_check(&self) -> Result<(), ScenarioError> {
        if self.horizon == 0 {
            return Err(ScenarioError::invalid("horizon", "must be at least one slot"));
        }
        self.slots.validate().map_err(|m| ScenarioError::invalid("slots", m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
horizon = 1

[[tou]]
start_slot = 0
end_slot = 144
price = 0.15

[[households]]
id = 1
pcc = 0
bus = 1
phase = 0
x_bar = 1.5
kind = "battery"
battery = { e_max = 8.1, e_min = 0.9, s_max = 0.5, s_min = -0.5, a = 0.5, b = 0.01, e_init = 4.0, extra_cycle_kwh = 7.2 }
prices = { p_f = 0.10, a_r = 0.3, reward_frac = 0.05 }
profile = [{ slot = 0, load_kwh = 0.2, pv_kwh = 0.5 }]
commitments = [{ slot = 0, x_hat_m = -0.1, x_hat_u = -0.1, x_hat = -0.2, p_m = 0.125, s_hat = -0.1 }]

[feeder]
nodes = [
  { id = 0, phase = 0, bus = 0, pcc = 0 },
  { id = 1, phase = 0, bus = 1, parent = 0 },
]
lines = [{ from = 0, to = 1, resistance = 0.03, reactance = 0.005, ampacity = 200.0 }]
"#;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("s.toml");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_document_loads() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario(&write(dir.path(), MINIMAL)).unwrap();
        assert_eq!(s.households.len(), 1);
        assert_eq!(s.n_pcc(), 1);
        assert_eq!(s.horizon, 1);
        let st = s.household_state(0, 0, 4.0);
        assert!((st.r_hat - -0.3).abs() < 1e-12);
        assert!((st.r - -0.3).abs() < 1e-12);
        // Single-slot day: the whole daily budget lands on slot 0.
        assert!((s.households[0].cycling[0].dn - (-0.1 - 7.2)).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_commitment_names_household() {
        let dir = tempfile::tempdir().unwrap();
        let bad = MINIMAL.replace("x_hat = -0.2", "x_hat = -0.3");
        let err = load_scenario(&write(dir.path(), &bad)).unwrap_err();
        match err {
            ScenarioError::Household { household, field, .. } => {
                assert_eq!(household, 1);
                assert_eq!(field, "x_hat");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_scenario(&write(dir.path(), "horizon = [")).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
    }

    #[test]
    fn missing_slot_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let bad = MINIMAL.replace("horizon = 1", "horizon = 2");
        let err = load_scenario(&write(dir.path(), &bad)).unwrap_err();
        assert!(matches!(err, ScenarioError::Household { household: 1, .. }), "{err}");
    }

    #[test]
    fn energy_outside_bounds_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = MINIMAL.replace("e_init = 4.0", "e_init = 8.5");
        let err = load_scenario(&write(dir.path(), &bad)).unwrap_err();
        match err {
            ScenarioError::Household { field, .. } => assert_eq!(field, "e0"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let s = load_scenario(&write(dir.path(), MINIMAL)).unwrap();
        let out = dir.path().join("copy").join("again.toml");
        s.save(&out).unwrap();
        let back = load_scenario(&out).unwrap();
        assert_eq!(s, back);
    }
}
