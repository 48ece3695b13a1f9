//! Seeded synthetic scenarios: consumption and PV curves, a day-ahead
//! persistence forecast, a simple hour-ahead market schedule and a uniform
//! three-phase feeder.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BatteryConfig, FlexKind, Household, MarketCommitment, MonitoringWindow, PccId, PriceConfig, Scenario, SlotConfig,
    SlotProfile, TouBand, TouSchedule,
};
use crate::powerflow::{FeederModel, Line};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub households: usize,
    pub pv_share: f64,
    pub battery_share: f64,
    pub seed: u64,
    pub days: usize,
    pub buses_per_phase: usize,
    /// Share of households fitted with a phase switch.
    pub switchable_share: f64,
    /// Peak PV output per installation, kW (drawn uniformly in this range).
    pub pv_kwp: (f64, f64),
    /// Daily clear-sky factor (drawn uniformly in this range).
    pub pv_daily: (f64, f64),
    /// Share of households initially on each phase.
    pub phase_weights: [f64; 3],
    pub segment_m: f64,
    pub ohm_per_km: f64,
    pub ampacity: f64,
    pub battery_kwh: f64,
    pub battery_kw: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            households: 50,
            pv_share: 0.8,
            battery_share: 0.6,
            seed: 1,
            days: 7,
            buses_per_phase: 10,
            switchable_share: 0.3,
            pv_kwp: (3.0, 6.0),
            pv_daily: (0.75, 1.0),
            phase_weights: [0.45, 0.33, 0.22],
            segment_m: 40.0,
            // 70 mm² aluminium.
            ohm_per_km: 0.443,
            ampacity: 200.0,
            battery_kwh: 9.0,
            battery_kw: 3.0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let share = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1] (got {v})")))
            }
        };
        share(self.pv_share, "pv share")?;
        share(self.battery_share, "battery share")?;
        share(self.switchable_share, "switchable share")?;
        if self.households == 0 || self.days == 0 || self.buses_per_phase == 0 {
            return Err(Error::Config("households, days and buses must be positive".into()));
        }
        Ok(())
    }
}

const SLOTS_PER_DAY: usize = 144;
const SLOT_H: f64 = 1.0 / 6.0;
const TOU_DAY: f64 = 0.15;
const TOU_EVENING: f64 = 0.20;
const FIT: f64 = 0.10;

/// ToU bands: 0.15 €/kWh from midnight until 17:00, 0.20 €/kWh afterwards.
pub fn default_tou() -> TouSchedule {
    TouSchedule(vec![
        TouBand {
            start_slot: 0,
            end_slot: 102,
            price: TOU_DAY,
        },
        TouBand {
            start_slot: 102,
            end_slot: 144,
            price: TOU_EVENING,
        },
    ])
}

fn gauss(h: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((h - centre) / width).powi(2)).exp()
}

/// Two-peak daily consumption shape in kW at hour `h`.
fn load_shape(h: f64) -> f64 {
    0.35 + 0.9 * gauss(h, 7.5, 1.2) + 1.4 * gauss(h, 19.5, 1.8)
}

/// Clear-sky PV shape in [0, 1] at hour `h`: sunrise 06:00, sunset 20:00.
fn pv_shape(h: f64) -> f64 {
    if (6.0..20.0).contains(&h) {
        (PI * (h - 6.0) / 14.0).sin().powi(2)
    } else {
        0.0
    }
}

struct Draft {
    phase: u8,
    bus: usize,
    switchable: bool,
    kind: FlexKind,
    battery: BatteryConfig,
    prices: PriceConfig,
    x_bar: f64,
    profile: Vec<SlotProfile>,
}

/// Builds a deterministic synthetic scenario.
pub fn generate_synthetic_scenario(params: &GeneratorParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let horizon = params.days * SLOTS_PER_DAY;
    let daily: Vec<f64> = (0..params.days)
        .map(|_| rng.random_range(params.pv_daily.0..=params.pv_daily.1))
        .collect();

    let n = params.households;
    let n_pv = (params.pv_share * n as f64).round() as usize;
    let n_batt = (params.battery_share * n as f64).round() as usize;
    let n_switch = (params.switchable_share * n as f64).round() as usize;
    let weight_total: f64 = params.phase_weights.iter().sum();

    let mut drafts = Vec::with_capacity(n);
    for i in 0..n {
        let draw: f64 = rng.random_range(0.0..weight_total);
        let mut phase = 2u8;
        let mut acc = 0.0;
        for (p, w) in params.phase_weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                phase = p as u8;
                break;
            }
        }
        let bus = rng.random_range(1..=params.buses_per_phase);
        let load_scale: f64 = rng.random_range(0.7..1.3);
        let kwp = if i < n_pv {
            rng.random_range(params.pv_kwp.0..=params.pv_kwp.1)
        } else {
            0.0
        };
        let profile = (0..horizon)
            .map(|t| {
                let h = (t % SLOTS_PER_DAY) as f64 * SLOT_H + SLOT_H / 2.0;
                let noise: f64 = rng.random_range(0.8..1.2);
                SlotProfile {
                    load_kwh: load_scale * load_shape(h) * noise * SLOT_H,
                    pv_kwh: kwp * daily[t / SLOTS_PER_DAY] * pv_shape(h) * SLOT_H,
                }
            })
            .collect();
        let has_batt = i < n_batt;
        let s_max = params.battery_kw * SLOT_H;
        let (kind, battery) = if has_batt {
            let cap = params.battery_kwh;
            (
                FlexKind::Battery,
                BatteryConfig {
                    e_max: 0.9 * cap,
                    e_min: 0.1 * cap,
                    s_max,
                    s_min: -s_max,
                    a: rng.random_range(0.05..0.15),
                    b: 0.01,
                    e_init: 0.3 * cap,
                    // RTC band 10-90 % of capacity.
                    extra_cycle_kwh: 0.8 * cap,
                },
            )
        } else {
            (
                FlexKind::FlexibleLoad,
                BatteryConfig {
                    e_max: 1.0,
                    e_min: 0.0,
                    s_max: 0.1,
                    s_min: -0.1,
                    a: rng.random_range(0.3..0.6),
                    b: 0.0,
                    e_init: 0.5,
                    extra_cycle_kwh: 1.0,
                },
            )
        };
        drafts.push(Draft {
            phase,
            bus,
            switchable: i < n_switch,
            kind,
            battery,
            prices: PriceConfig {
                p_f: FIT,
                a_r: rng.random_range(0.02..0.05),
                reward_frac: 0.05,
            },
            // 9 kVA contract per 10-minute slot.
            x_bar: 1.5,
            profile,
        });
    }

    let tou = default_tou();
    let commitments = schedule(&drafts, params, &tou, horizon);

    let households: Vec<Household> = drafts
        .into_iter()
        .zip(commitments)
        .enumerate()
        .map(|(i, (d, c))| Household {
            id: i as u32 + 1,
            pcc: PccId(usize::from(d.phase)),
            bus: d.bus,
            phase: d.phase,
            switchable: d.switchable,
            x_bar: d.x_bar,
            kind: d.kind,
            battery: d.battery,
            prices: d.prices,
            profile: d.profile,
            commitments: c,
            cycling: Vec::new(),
        })
        .collect();

    let feeder = FeederModel::uniform(
        3,
        params.buses_per_phase,
        Line {
            from: 0,
            to: 0,
            resistance: params.ohm_per_km * params.segment_m / 1000.0,
            reactance: 0.08 * params.segment_m / 1000.0,
            ampacity: params.ampacity,
        },
    )?;
    let mut scenario = Scenario {
        horizon,
        slots: SlotConfig::default(),
        monitoring_window: MonitoringWindow::default(),
        tou_schedule: tou,
        households,
        feeder,
    };
    scenario.derive_cycling();
    scenario.validate()?;
    Ok(scenario)
}

/// Hour-ahead market stand-in.
///
/// Each household forecasts its gap by day-ahead persistence (the first day
/// is taken as known) and schedules its battery for self-consumption within
/// the market band. Surplus and deficit are then matched between neighbours
/// pro rata; the rest is traded with the supplier.
fn schedule(
    drafts: &[Draft],
    params: &GeneratorParams,
    tou: &TouSchedule,
    horizon: usize,
) -> Vec<Vec<MarketCommitment>> {
    let cap = params.battery_kwh;
    let (band_lo, band_hi) = (0.1 * cap, 0.77 * cap);
    let mut e_sched: Vec<f64> = drafts.iter().map(|d| d.battery.e_init).collect();
    let mut out = vec![Vec::with_capacity(horizon); drafts.len()];
    for t in 0..horizon {
        let p_u = tou.price_at((t % SLOTS_PER_DAY) as u32).unwrap_or(TOU_DAY);
        let p_m = 0.5 * (p_u + FIT);
        let mut x_hat = Vec::with_capacity(drafts.len());
        let mut s_hat = Vec::with_capacity(drafts.len());
        for (i, d) in drafts.iter().enumerate() {
            let src = if t >= SLOTS_PER_DAY { t - SLOTS_PER_DAY } else { t };
            let r_hat = d.profile[src].load_kwh - d.profile[src].pv_kwh;
            let s = if d.kind == FlexKind::Battery {
                let b = &d.battery;
                if r_hat >= 0.0 {
                    r_hat.min(b.s_max).min((e_sched[i] - band_lo).max(0.0))
                } else {
                    r_hat.max(b.s_min).max(-(band_hi - e_sched[i]).max(0.0))
                }
            } else {
                0.0
            };
            e_sched[i] -= s;
            s_hat.push(s);
            x_hat.push(r_hat - s);
        }
        let surplus: f64 = x_hat.iter().filter(|x| **x < 0.0).map(|x| -x).sum();
        let deficit: f64 = x_hat.iter().filter(|x| **x > 0.0).sum();
        let matched = surplus.min(deficit);
        for i in 0..drafts.len() {
            let x = x_hat[i];
            let frac = if x < 0.0 && surplus > 0.0 {
                matched / surplus
            } else if x > 0.0 && deficit > 0.0 {
                matched / deficit
            } else {
                0.0
            };
            let x_m = x * frac;
            // Rebuilt from its parts so that x_hat = x_hat_m + x_hat_u holds exactly.
            out[i].push(MarketCommitment::new(x_m, x - x_m, p_m, s_hat[i]));
        }
    }
    out
}
