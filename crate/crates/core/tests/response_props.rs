use proptest::prelude::*;
use rtc_core::costs::local_cost;
use rtc_core::model::{BatteryParams, HouseholdState, MarketCommitment, PccId, PriceParams};
use rtc_core::response::{best_response, feasible_interval, response_objective};

prop_compose! {
    fn household()(
        a in 0.01f64..1.0,
        b in -0.05f64..0.05,
        a_r in 0.01f64..0.5,
        x_hat_m in -1.5f64..1.5,
        x_hat_u in -0.5f64..0.5,
        s_hat in -0.3f64..0.3,
        r_tilde in -0.5f64..0.5,
        e0 in 1.0f64..8.0,
        s_lim in 0.1f64..1.0,
        p_f in 0.05f64..0.12,
        spread in 0.01f64..0.1,
        reward in 0.0f64..0.1,
    ) -> HouseholdState {
        let commitment = MarketCommitment::new(x_hat_m, x_hat_u, p_f + spread, s_hat);
        let r_hat = commitment.x_hat + s_hat;
        HouseholdState {
            id: 1,
            pcc: PccId(0),
            r_hat,
            r_tilde,
            r: r_hat + r_tilde,
            e0,
            x_0k: 0.0,
            s_0k: 0.0,
            x_bar: 3.0,
            commitment,
            battery: BatteryParams {
                e_max: 8.1,
                e_min: 0.9,
                s_max: s_lim,
                s_min: -s_lim,
                cyc_up: s_lim,
                cyc_dn: -s_lim,
                a,
                b,
            },
            prices: PriceParams {
                p_u: p_f + 2.0 * spread,
                p_f,
                a_r,
                reward,
            },
        }
    }
}

fn grid_argmin(h: &HouseholdState, u: f64, d: f64) -> (f64, f64) {
    let iv = feasible_interval(h).unwrap();
    let n = ((iv.hi - iv.lo) / 1e-4).ceil() as usize;
    let mut best = (iv.lo, f64::INFINITY);
    for k in 0..=n {
        let x = (iv.lo + k as f64 * 1e-4).min(iv.hi);
        let v = response_objective(h, x, u, d);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_matches_grid_search(h in household(), u in -0.3f64..0.3, d in 0.0f64..0.01) {
        let x = best_response(&h, u, d).unwrap().x;
        let (xg, vg) = grid_argmin(&h, u, d);
        let v = response_objective(&h, x, u, d);
        prop_assert!(v <= vg + 1e-9, "closed form {x} ({v}) worse than grid {xg} ({vg})");
        prop_assert!((x - xg).abs() <= 1e-3, "closed form {x} vs grid {xg}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn response_is_monotone_in_signal(h in household(), u in -0.5f64..0.5, du in 0.0f64..0.5) {
        let lo = best_response(&h, u, 0.0).unwrap().x;
        let hi = best_response(&h, u + du, 0.0).unwrap().x;
        prop_assert!(hi <= lo + 1e-12);
    }

    /// One-sided derivatives at the minimiser point inward from the bounds.
    #[test]
    fn kkt_conditions_hold(h in household(), u in -0.3f64..0.3) {
        let iv = feasible_interval(&h).unwrap();
        let x = best_response(&h, u, 0.0).unwrap().x;
        let eps = 1e-7;
        let j = |y: f64| local_cost(&h, y) + u * y;
        if x + eps <= iv.hi {
            prop_assert!((j(x + eps) - j(x)) / eps >= -1e-5);
        }
        if x - eps >= iv.lo {
            prop_assert!((j(x - eps) - j(x)) / eps >= -1e-5);
        }
    }

    #[test]
    fn strategy_balances_gap(h in household(), u in -0.3f64..0.3) {
        let st = best_response(&h, u, 0.0).unwrap();
        prop_assert!((st.x + st.s - h.r).abs() < 1e-12);
    }
}
