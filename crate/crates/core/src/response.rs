//! Feasible grid flows and the exact best response of one prosumer.
//!
//! With the battery flow eliminated through `s = r - x`, the objective
//! `f(x) + u x + d x²` is a convex quadratic on each side of the market kink
//! `x = x_hat_m`, so the global minimiser over an interval is found by
//! comparing a handful of candidates.

use serde::{Deserialize, Serialize};

use crate::costs::local_cost;
use crate::error::ResponseError;
use crate::model::{HouseholdState, Strategy};

/// Candidates closer than this (in €) are treated as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FeasibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Battery flow bounds: the intersection of the energy, power and cycling ranges.
pub fn battery_range(h: &HouseholdState) -> (f64, f64) {
    let b = &h.battery;
    let lo = (h.e0 - b.e_max).max(b.s_min).max(b.cyc_dn);
    let hi = (h.e0 - b.e_min).min(b.s_max).min(b.cyc_up);
    (lo, hi)
}

/// Grid flows reachable by the battery alone, ignoring the contracted limit.
fn battery_interval(h: &HouseholdState) -> FeasibleInterval {
    let (s_lo, s_hi) = battery_range(h);
    FeasibleInterval {
        lo: h.r - s_hi,
        hi: h.r - s_lo,
    }
}

/// The feasible set of grid flows: battery limits mapped through `x = r - s`
/// and intersected with `[-x_bar, x_bar]`.
pub fn feasible_interval(h: &HouseholdState) -> Result<FeasibleInterval, ResponseError> {
    let batt = battery_interval(h);
    let lo = batt.lo.max(-h.x_bar);
    let hi = batt.hi.min(h.x_bar);
    if lo > hi {
        return Err(ResponseError::ContractClash {
            household: h.id,
            battery_lo: batt.lo,
            battery_hi: batt.hi,
            x_bar: h.x_bar,
        });
    }
    Ok(FeasibleInterval { lo, hi })
}

/// Like [`feasible_interval`], but when the contracted limit cannot be met
/// the battery limits win: the result collapses to the battery-reachable flow
/// closest to the contract and the clash is returned alongside.
pub fn relaxed_interval(h: &HouseholdState) -> (FeasibleInterval, Option<ResponseError>) {
    match feasible_interval(h) {
        Ok(iv) => (iv, None),
        Err(e) => {
            let batt = battery_interval(h);
            let x = if batt.lo > h.x_bar { batt.lo } else { batt.hi };
            (FeasibleInterval { lo: x, hi: x }, Some(e))
        }
    }
}

/// Objective minimised by a responding agent: `f(x) + u x + d x²`.
pub fn response_objective(h: &HouseholdState, x: f64, u_at_pcc: f64, d_over_h: f64) -> f64 {
    local_cost(h, x) + u_at_pcc * x + d_over_h * x * x
}

/// Exact minimiser of [`response_objective`] over the feasible interval.
pub fn best_response(h: &HouseholdState, u_at_pcc: f64, d_over_h: f64) -> Result<Strategy, ResponseError> {
    let iv = feasible_interval(h)?;
    Ok(best_response_within(h, iv, u_at_pcc, d_over_h))
}

/// Exact minimiser of [`response_objective`] over `iv`.
pub fn best_response_within(h: &HouseholdState, iv: FeasibleInterval, u_at_pcc: f64, d_over_h: f64) -> Strategy {
    let x = minimise(h, iv, u_at_pcc, d_over_h);
    Strategy::balanced(h.pcc, h.r, x)
}

fn minimise(h: &HouseholdState, iv: FeasibleInterval, u: f64, d: f64) -> f64 {
    let a = h.battery.a;
    let b = h.battery.b;
    let a_r = h.prices.a_r;
    let kink = h.commitment.x_hat_m;
    let x_hat = h.commitment.x_hat;
    // Battery deviation is (r - x) - s_hat = delta0 - x.
    let delta0 = h.r - h.commitment.s_hat;
    let curvature = a + a_r + d;
    let vertex = |slope: f64| (2.0 * a * delta0 + b + 2.0 * a_r * x_hat - slope - u) / (2.0 * curvature);

    let mut candidates = [f64::NAN; 5];
    candidates[0] = iv.lo;
    candidates[1] = iv.hi;
    if iv.contains(kink) {
        candidates[2] = kink;
    }
    let upper_lo = iv.lo.max(kink);
    if upper_lo <= iv.hi {
        candidates[3] = vertex(h.prices.p_u).clamp(upper_lo, iv.hi);
    }
    let lower_hi = iv.hi.min(kink);
    if iv.lo <= lower_hi {
        candidates[4] = vertex(h.prices.p_f).clamp(iv.lo, lower_hi);
    }

    let mut best = iv.lo;
    let mut best_val = response_objective(h, best, u, d);
    for &x in candidates.iter().filter(|x| !x.is_nan()) {
        let val = response_objective(h, x, u, d);
        let better = if val < best_val - TIE_EPS {
            true
        } else if val <= best_val + TIE_EPS {
            let (dx, db) = ((x - x_hat).abs(), (best - x_hat).abs());
            dx < db || (dx == db && x < best)
        } else {
            false
        };
        if better {
            best = x;
            best_val = val;
        }
    }
    best
}

/// Battery setting for the rest of the slot so that, if held, the slot's
/// total grid exchange equals `x_star`.
pub fn battery_setpoint(h: &HouseholdState, x_star: f64) -> f64 {
    h.r - x_star - h.s_0k
}
