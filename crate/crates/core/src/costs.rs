//! Cost terms of a prosumer's objective for one slot.
//!
//! All functions take the grid flow `x` (or battery flow `s`) in kWh for the
//! whole slot and return euros.

use serde::{Deserialize, Serialize};

use crate::model::HouseholdState;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub degradation: f64,
    pub price: f64,
    /// Negative when the household keeps a net reward.
    pub reward: f64,
    pub local_total: f64,
    /// Signal term `u * x`.
    pub coupling: f64,
    pub total: f64,
}

/// Battery or comfort degradation for deviating from the scheduled flow.
pub fn degradation_cost(h: &HouseholdState, s: f64) -> f64 {
    let dev = s - h.commitment.s_hat;
    h.battery.a * dev * dev + h.battery.b * dev
}

/// Supplier slope applied to the part of `x` beyond the neighbour-traded
/// quantity. The kink itself belongs to the upper branch.
pub fn marginal_price(h: &HouseholdState, x: f64) -> f64 {
    if x >= h.commitment.x_hat_m {
        h.prices.p_u
    } else {
        h.prices.p_f
    }
}

/// Final bill for exchanging `x` with the grid: the traded quantity is paid
/// at the market price, anything above it at the supplier price and any
/// shortfall is sold back at the feed-in tariff.
pub fn price_cost(h: &HouseholdState, x: f64) -> f64 {
    let c = &h.commitment;
    (x - c.x_hat_m) * marginal_price(h, x) + c.x_hat_m * c.p_m
}

/// Reward for honouring the hour-ahead commitment; becomes a penalty once
/// `|x - x_hat| > sqrt(R / a_r)`.
pub fn reward_cost(h: &HouseholdState, x: f64) -> f64 {
    let dev = x - h.commitment.x_hat;
    h.prices.a_r * dev * dev - h.prices.reward
}

/// `f(x)`: degradation (with the battery covering `r - x`), reward and price.
pub fn local_cost(h: &HouseholdState, x: f64) -> f64 {
    degradation_cost(h, h.r - x) + reward_cost(h, x) + price_cost(h, x)
}

/// `J(x, u) = f(x) + u x`, split into its components.
pub fn coupled_cost(h: &HouseholdState, x: f64, u_at_pcc: f64) -> CostBreakdown {
    let degradation = degradation_cost(h, h.r - x);
    let reward = reward_cost(h, x);
    let price = price_cost(h, x);
    let local_total = degradation + price + reward;
    let coupling = u_at_pcc * x;
    CostBreakdown {
        degradation,
        price,
        reward,
        local_total,
        coupling,
        total: local_total + coupling,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BatteryParams, MarketCommitment, PccId, PriceParams};
    use proptest::prelude::*;

    /// The household used throughout the hand-worked examples.
    fn worked() -> HouseholdState {
        HouseholdState {
            id: 1,
            pcc: PccId(0),
            r_hat: 2.0,
            r_tilde: 0.0,
            r: 2.0,
            e0: 5.0,
            x_0k: 0.0,
            s_0k: 0.0,
            x_bar: 10.0,
            commitment: MarketCommitment::new(2.0, 0.0, 0.12, 0.0),
            battery: BatteryParams {
                e_max: 8.1,
                e_min: 0.9,
                s_max: 5.0,
                s_min: -5.0,
                cyc_up: 5.0,
                cyc_dn: -5.0,
                a: 0.05,
                b: 0.0,
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
    fn degradation_examples() {
        let mut h = worked();
        h.battery.b = 0.01;
        h.commitment.s_hat = 0.5;
        assert_eq!(degradation_cost(&h, 0.5), 0.0);
        assert!((degradation_cost(&h, 2.5) - 0.22).abs() < 1e-12);
        assert!((degradation_cost(&h, -1.5) - 0.18).abs() < 1e-12);
    }

    #[test]
    fn price_examples() {
        let h = worked();
        assert_eq!(price_cost(&h, 2.0), 2.0 * 0.12);
        assert!((price_cost(&h, 3.0) - 0.39).abs() < 1e-12);
        assert!((price_cost(&h, 1.0) - 0.14).abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let h = worked();
        assert_eq!(reward_cost(&h, 2.0), -0.05);
        assert!((reward_cost(&h, 4.0) - 0.03).abs() < 1e-12);
        assert!(reward_cost(&h, 2.0 + 2.5f64.sqrt()).abs() < 1e-12);
        assert!(reward_cost(&h, 2.0 - 1.6) > 0.0);
        assert!(reward_cost(&h, 2.0 - 1.5) < 0.0);
    }

    #[test]
    fn local_and_coupled_examples() {
        let h = worked();
        assert!((local_cost(&h, 2.0) - 0.19).abs() < 1e-12);
        let b = coupled_cost(&h, 2.0, 0.0);
        assert_eq!(b.total, b.local_total);
        let b = coupled_cost(&h, 3.0, 0.10);
        assert!((b.local_total - 0.41).abs() < 1e-12);
        assert!((b.total - 0.71).abs() < 1e-12);
        assert!((b.local_total - (b.degradation + b.price + b.reward)).abs() < 1e-12);
    }

    prop_compose! {
        fn household()(
            a in 0.01f64..2.0, b in -0.05f64..0.05, a_r in 0.0f64..2.0,
            x_hat_m in -3.0f64..3.0, x_hat_u in -3.0f64..3.0, s_hat in -1.0f64..1.0,
            r_tilde in -1.0f64..1.0, p_f in 0.01f64..0.1, dm in 0.001f64..0.1, du in 0.001f64..0.1,
            reward in 0.0f64..0.2,
        ) -> HouseholdState {
            let mut h = worked();
            h.battery.a = a;
            h.battery.b = b;
            h.prices.a_r = a_r;
            h.prices.p_f = p_f;
            h.prices.p_u = p_f + dm + du;
            h.prices.reward = reward;
            h.commitment = MarketCommitment::new(x_hat_m, x_hat_u, p_f + dm, s_hat);
            h.r_hat = h.commitment.x_hat + s_hat;
            h.r_tilde = r_tilde;
            h.r = h.r_hat + r_tilde;
            h
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn local_cost_is_convex(h in household(), x1 in -6.0f64..6.0, x2 in -6.0f64..6.0, t in 0.0f64..=1.0) {
            let mid = local_cost(&h, t * x1 + (1.0 - t) * x2);
            let chord = t * local_cost(&h, x1) + (1.0 - t) * local_cost(&h, x2);
            prop_assert!(mid <= chord + 1e-9);
        }

        #[test]
        fn strongly_convex_remainder(h in household(), x1 in -6.0f64..6.0, x2 in -6.0f64..6.0, t in 0.0f64..=1.0) {
            let q = h.battery.a + h.prices.a_r;
            let g = |x: f64| local_cost(&h, x) - q * x * x;
            let mid = g(t * x1 + (1.0 - t) * x2);
            let chord = t * g(x1) + (1.0 - t) * g(x2);
            prop_assert!(mid <= chord + 1e-9);
        }

        #[test]
        fn kink_is_continuous(h in household()) {
            let c = h.commitment;
            let upper = (c.x_hat_m - c.x_hat_m) * h.prices.p_u + c.x_hat_m * c.p_m;
            let lower = (c.x_hat_m - c.x_hat_m) * h.prices.p_f + c.x_hat_m * c.p_m;
            prop_assert!((upper - lower).abs() < 1e-12);
            let eps = 1e-9;
            let left = price_cost(&h, c.x_hat_m - eps);
            let right = price_cost(&h, c.x_hat_m + eps);
            prop_assert!((left - right).abs() < 1e-9);
        }

        #[test]
        fn breakdown_identities(h in household(), x in -6.0f64..6.0, u in -2.0f64..2.0) {
            let b = coupled_cost(&h, x, u);
            prop_assert!((b.local_total - (b.degradation + b.price + b.reward)).abs() <= 1e-12);
            prop_assert!((b.total - (b.local_total + b.coupling)).abs() <= 1e-12);
        }
    }
}
