//! Domain types shared by every other module, plus scenario ingestion.
//!
//! Energies are kWh per slot throughout (a 10-minute slot by default), prices
//! are €/kWh. Grid flows are positive when drawn from the grid and negative
//! when injected; battery flows are positive on discharge.

mod scenario;

pub use scenario::{
    load_scenario, BatteryConfig, CycleBudget, FlexKind, Household, MonitoringWindow, PriceConfig, Scenario,
    SlotProfile, TouBand, TouSchedule,
};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Time discretisation of the simulation and of the coordination loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub slot_duration_min: u32,
    pub iteration_period_s: u32,
    pub max_iterations: u32,
    pub slots_per_day: u32,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self {
            slot_duration_min: 10,
            iteration_period_s: 10,
            max_iterations: 60,
            slots_per_day: 144,
        }
    }
}

impl SlotConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.slot_duration_min == 0
            || self.iteration_period_s == 0
            || self.max_iterations == 0
            || self.slots_per_day == 0
        {
            return Err("all slot parameters must be positive".into());
        }
        if u64::from(self.max_iterations) * u64::from(self.iteration_period_s) > u64::from(self.slot_seconds()) {
            return Err(format!(
                "max_iterations × iteration_period ({} s) exceeds the slot duration ({} s)",
                self.max_iterations * self.iteration_period_s,
                self.slot_seconds()
            ));
        }
        Ok(())
    }

    pub fn slot_seconds(&self) -> u32 {
        self.slot_duration_min * 60
    }

    pub fn slot_hours(&self) -> f64 {
        f64::from(self.slot_duration_min) / 60.0
    }

    /// Average power (kW) of an energy quantity spread over one slot.
    pub fn kwh_to_kw(&self, kwh: f64) -> f64 {
        kwh / self.slot_hours()
    }

    pub fn kw_to_kwh(&self, kw: f64) -> f64 {
        kw * self.slot_hours()
    }
}

/// Index of a point of common coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PccId(pub usize);

impl PccId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PccId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pcc{}", self.0)
    }
}

/// Hour-ahead market outcome for one household and one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketCommitment {
    /// Quantity traded with neighbours.
    pub x_hat_m: f64,
    /// Quantity contracted with the supplier.
    pub x_hat_u: f64,
    /// Local market price.
    pub p_m: f64,
    /// Scheduled battery flow.
    pub s_hat: f64,
    /// Total committed grid exchange, `x_hat_m + x_hat_u`.
    pub x_hat: f64,
}

impl MarketCommitment {
    pub fn new(x_hat_m: f64, x_hat_u: f64, p_m: f64, s_hat: f64) -> Self {
        Self {
            x_hat_m,
            x_hat_u,
            p_m,
            s_hat,
            x_hat: x_hat_m + x_hat_u,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.x_hat == self.x_hat_m + self.x_hat_u
    }
}

/// Battery (or pseudo-battery) limits and degradation coefficients for the
/// current slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub e_max: f64,
    pub e_min: f64,
    /// Largest discharge in one slot.
    pub s_max: f64,
    /// Largest charge in one slot (negative).
    pub s_min: f64,
    /// Discharge cycling budget left for this slot.
    pub cyc_up: f64,
    /// Charge cycling budget left for this slot (negative).
    pub cyc_dn: f64,
    pub a: f64,
    pub b: f64,
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.e_min < self.e_max) {
            return Err(format!("e_min {} must be below e_max {}", self.e_min, self.e_max));
        }
        if !(self.s_min < 0.0 && 0.0 < self.s_max) {
            return Err(format!(
                "power limits must satisfy s_min < 0 < s_max (got {}, {})",
                self.s_min, self.s_max
            ));
        }
        if !(self.cyc_dn <= 0.0 && 0.0 <= self.cyc_up) {
            return Err(format!(
                "cycling budgets must satisfy cyc_dn <= 0 <= cyc_up (got {}, {})",
                self.cyc_dn, self.cyc_up
            ));
        }
        if !(self.a > 0.0) {
            return Err(format!("degradation coefficient a must be positive (got {})", self.a));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    /// Supplier time-of-use price.
    pub p_u: f64,
    /// Feed-in tariff.
    pub p_f: f64,
    /// Reward deviation coefficient.
    pub a_r: f64,
    /// Reward granted for the slot at zero deviation.
    pub reward: f64,
}

/// Everything one prosumer knows when it computes its response for a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdState {
    pub id: u32,
    pub pcc: PccId,
    /// Forecast gap `load - production` used by the hour-ahead market.
    pub r_hat: f64,
    /// Forecast error on the gap.
    pub r_tilde: f64,
    /// Updated gap `r_hat + r_tilde`.
    pub r: f64,
    /// Battery energy at slot start.
    pub e0: f64,
    /// Grid energy already exchanged in this slot.
    pub x_0k: f64,
    /// Battery energy already used in this slot.
    pub s_0k: f64,
    /// Contracted power limit expressed per slot.
    pub x_bar: f64,
    pub commitment: MarketCommitment,
    pub battery: BatteryParams,
    pub prices: PriceParams,
}

impl HouseholdState {
    /// Checks the state invariants; the message names the offending field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let field = |f: &str, m: String| (f.to_string(), m);
        if !self.commitment.is_consistent() {
            return Err(field(
                "commitment.x_hat",
                format!(
                    "x_hat {} differs from x_hat_m + x_hat_u = {}",
                    self.commitment.x_hat,
                    self.commitment.x_hat_m + self.commitment.x_hat_u
                ),
            ));
        }
        self.battery.validate().map_err(|m| field("battery", m))?;
        if !(self.battery.e_min <= self.e0 && self.e0 <= self.battery.e_max) {
            return Err(field(
                "e0",
                format!(
                    "battery energy {} outside [{}, {}]",
                    self.e0, self.battery.e_min, self.battery.e_max
                ),
            ));
        }
        if !(self.x_bar > 0.0) {
            return Err(field(
                "x_bar",
                format!("contracted limit must be positive (got {})", self.x_bar),
            ));
        }
        let p = &self.prices;
        let p_m = self.commitment.p_m;
        if !(p.p_f < p_m && p_m < p.p_u) {
            return Err(field(
                "prices",
                format!("expected p_f < p_m < p_u, got {} / {} / {}", p.p_f, p_m, p.p_u),
            ));
        }
        if !(p.a_r >= 0.0) || !(p.reward >= 0.0) {
            return Err(field("prices", "a_r and reward must be non-negative".into()));
        }
        Ok(())
    }
}

/// Replaces the forecast error with `l_tilde - g_tilde` and recomputes the gap.
pub fn update_gap(h: &HouseholdState, l_tilde: f64, g_tilde: f64) -> HouseholdState {
    let r_tilde = l_tilde - g_tilde;
    HouseholdState {
        r_tilde,
        r: h.r_hat + r_tilde,
        ..h.clone()
    }
}

/// A household's decision for the slot: grid flow and battery flow.
///
/// The grid flow is conceptually an N-vector over PCCs with a single
/// non-zero entry at the household's own PCC, so only that entry is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub pcc: PccId,
    pub x: f64,
    pub s: f64,
}

impl Strategy {
    /// Builds the strategy for grid flow `x` with the battery covering the rest of `r`.
    pub fn balanced(pcc: PccId, r: f64, x: f64) -> Self {
        Self { pcc, x, s: r - x }
    }

    pub fn x_vector(&self, n_pcc: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_pcc];
        if let Some(slot) = v.get_mut(self.pcc.0) {
            *slot = self.x;
        }
        v
    }
}

#[cfg(test)]
pub(crate) use tests::sample_state;

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_state() -> HouseholdState {
        HouseholdState {
            id: 7,
            pcc: PccId(0),
            r_hat: 1.0,
            r_tilde: 0.0,
            r: 1.0,
            e0: 5.0,
            x_0k: 0.0,
            s_0k: 0.0,
            x_bar: 6.0,
            commitment: MarketCommitment::new(0.5, 0.5, 0.12, 0.0),
            battery: BatteryParams {
                e_max: 8.1,
                e_min: 0.9,
                s_max: 2.0,
                s_min: -2.0,
                cyc_up: 1.5,
                cyc_dn: -1.5,
                a: 0.05,
                b: 0.01,
            },
            prices: PriceParams {
                p_u: 0.15,
                p_f: 0.10,
                a_r: 0.02,
                reward: 0.05,
            },
        }
    }

    #[test]
    fn update_gap_zero_error() {
        let h = update_gap(&sample_state(), 0.0, 0.0);
        assert_eq!(h.r, 1.0);
        assert_eq!(h.r_tilde, 0.0);
    }

    #[test]
    fn update_gap_hand_values() {
        let h = update_gap(&sample_state(), 0.2, 0.5);
        assert!((h.r_tilde + 0.3).abs() < 1e-12);
        assert!((h.r - 0.7).abs() < 1e-12);

        let mut base = sample_state();
        base.r_hat = -2.0;
        let h = update_gap(&base, 0.1, -0.4);
        assert!((h.r + 1.5).abs() < 1e-12);
    }

    #[test]
    fn slot_config_budget() {
        assert!(SlotConfig::default().validate().is_ok());
        let bad = SlotConfig {
            max_iterations: 61,
            ..SlotConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!((SlotConfig::default().kwh_to_kw(1.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn state_validation_names_fields() {
        let mut h = sample_state();
        h.commitment.x_hat = 2.0;
        assert_eq!(h.validate().unwrap_err().0, "commitment.x_hat");
        let mut h = sample_state();
        h.e0 = 9.0;
        assert_eq!(h.validate().unwrap_err().0, "e0");
        assert!(sample_state().validate().is_ok());
    }

    #[test]
    fn strategy_vector_is_sparse() {
        let s = Strategy::balanced(PccId(1), 1.0, 0.25);
        assert_eq!(s.x_vector(3), vec![0.0, 0.25, 0.0]);
        assert_eq!(s.s, 0.75);
    }
}
