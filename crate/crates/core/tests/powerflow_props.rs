use proptest::prelude::*;
use rtc_core::powerflow::{
    check_limits, derive_constraints, node_injections, phase_sums, phase_variance, rebalance_phases, solve_load_flow,
    DeriveOptions, Direction, FeederModel, Line, Placement,
};

fn uniform(phases: u8, buses: usize, r: f64, x: f64, ampacity: f64) -> FeederModel {
    FeederModel::uniform(
        phases,
        buses,
        Line {
            from: 0,
            to: 0,
            resistance: r,
            reactance: x,
            ampacity,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn power_is_conserved(
        buses in 1usize..12,
        r in 0.005f64..0.05,
        x in 0.0f64..0.02,
        loads in proptest::collection::vec(-8.0f64..8.0, 36),
    ) {
        let f = uniform(3, buses, r, x, 200.0);
        let mut inj = vec![0.0; f.node_count()];
        for (n, node) in f.nodes().iter().enumerate() {
            if node.parent.is_some() {
                inj[n] = loads[n % loads.len()];
            }
        }
        let res = solve_load_flow(&f, &inj).unwrap();
        prop_assume!(res.converged);
        let total: f64 = inj.iter().sum();
        let magnitude: f64 = inj.iter().map(|p| p.abs()).sum::<f64>().max(1e-9);
        prop_assert!(
            (res.slack_kw - total - res.losses_kw).abs() <= 1e-6 * magnitude,
            "slack {} vs loads {} + losses {}", res.slack_kw, total, res.losses_kw
        );
        prop_assert!(res.max_mismatch_pu < 1e-6);
        prop_assert!(res.losses_kw >= 0.0);
    }

    #[test]
    fn voltage_is_monotone_along_a_branch(buses in 2usize..15, p in 0.1f64..6.0, sign in prop::bool::ANY) {
        let f = uniform(1, buses, 0.02, 0.005, 1e6);
        let q = if sign { p } else { -p };
        let inj: Vec<f64> = f.nodes().iter().map(|n| if n.parent.is_some() { q } else { 0.0 }).collect();
        let v = solve_load_flow(&f, &inj).unwrap().node_voltages;
        for w in v.windows(2) {
            if sign {
                prop_assert!(w[1] < w[0]);
            } else {
                prop_assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn greedy_rebalancing_never_worsens(loads in proptest::collection::vec(-6.0f64..6.0, 1..30), seed in 0usize..3) {
        let current: Vec<usize> = (0..loads.len()).map(|i| (i + seed) % 3).collect();
        let switchable: Vec<bool> = (0..loads.len()).map(|i| i % 2 == 0).collect();
        let out = rebalance_phases(3, &current, &switchable, &loads);
        prop_assert!(
            phase_variance(&phase_sums(3, &out, &loads)) <= phase_variance(&phase_sums(3, &current, &loads)) + 1e-9
        );
    }
}

#[test]
fn no_load_and_two_node_oracles() {
    let f = uniform(3, 8, 0.03, 0.01, 200.0);
    let res = solve_load_flow(&f, &vec![0.0; f.node_count()]).unwrap();
    assert!(res.node_voltages.iter().all(|v| *v == f.slack_voltage));
    assert!(res.line_currents.iter().all(|i| *i == 0.0));

    let f = uniform(1, 1, 0.1, 0.0, 200.0);
    let res = solve_load_flow(&f, &[0.0, 2.367]).unwrap();
    assert!((res.line_currents[0] - 10.0).abs() / 10.0 < 0.005);
    assert!((res.node_voltages[1] - 235.7).abs() / 235.7 < 0.005);
}

fn spread_placements(f: &FeederModel, n: usize, buses: usize) -> Vec<Placement> {
    (0..n)
        .map(|i| {
            let phase = (i % 3) as u8;
            let node = f.node_at(1 + (i / 3) % buses, phase).unwrap();
            Placement {
                node,
                pcc: f.pcc_of(node).unwrap(),
            }
        })
        .collect()
}

fn violates(f: &FeederModel, pl: &[Placement], flows: &[f64]) -> bool {
    check_limits(&solve_load_flow(f, &node_injections(f, pl, flows)).unwrap(), f).violation
}

/// Smallest scale at which the load flow violates, by bisection.
fn bisect(lo: f64, hi: f64, bad: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    assert!(!bad(lo) && bad(hi));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bad(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn derived_bound_brackets_the_limit() {
    let f = uniform(3, 8, 0.02, 0.004, 1e6);
    let pl = spread_placements(&f, 24, 8);
    let base: Vec<f64> = (0..24).map(|i| -0.8 - 0.05 * f64::from(i)).collect();
    let opts = DeriveOptions::new(Direction::Injection, 1.0 / 6.0);
    let d = derive_constraints(&f, &pl, &base, &opts, None).unwrap();
    assert!(d.binding.is_some());
    assert!(!violates(&f, &pl, &d.flows_kw));
    let next: Vec<f64> = d.flows_kw.iter().map(|q| q * (1.0 + opts.step_frac)).collect();
    assert!(violates(&f, &pl, &next));
    let scale = |m: f64| base.iter().map(|q| q * m).collect::<Vec<_>>();
    let m_star = bisect(1.0, 10.0, |m| violates(&f, &pl, &scale(m)));
    assert!(d.scale <= m_star && m_star <= d.scale * (1.0 + opts.step_frac) + 1e-12);

    // Bound per PCC: kWh per slot averaged over all households.
    let mut expect = [0.0; 3];
    for (p, q) in pl.iter().zip(&d.flows_kw) {
        expect[p.pcc.0] += q / 6.0 / 24.0;
    }
    for (c, e) in d.constraints.c_lo.iter().zip(expect) {
        assert!((c - e).abs() < 1e-12);
    }
}

#[test]
fn zero_baseline_bound_reproduced_by_bisection() {
    let f = uniform(3, 8, 0.02, 0.004, 1e6);
    let pl = spread_placements(&f, 24, 8);
    let base = vec![0.0; 24];
    let opts = DeriveOptions::new(Direction::Demand, 1.0 / 6.0);
    let d = derive_constraints(&f, &pl, &base, &opts, None).unwrap();
    let delta = opts.step_frac * f.transformer_kva / 24.0;
    let accepted = d.flows_kw[0] / delta;
    let k_star = bisect(0.0, 1e4, |k| violates(&f, &pl, &[k * delta; 24]));
    assert!(
        accepted <= k_star && k_star <= accepted + 1.0 + 1e-9,
        "{accepted} vs {k_star}"
    );
    assert!(d.constraints.c_hi.iter().all(|c| *c > 0.0));
    assert!(d.constraints.c_lo.iter().all(|c| c.is_infinite()));
}

#[test]
fn greedy_matches_exhaustive_search_on_equal_loads() {
    let loads = [2.0, 2.0, 2.0];
    let out = rebalance_phases(3, &[0, 0, 0], &[true; 3], &loads);
    let mut best = f64::INFINITY;
    for code in 0..27 {
        let a = [code % 3, (code / 3) % 3, code / 9];
        best = best.min(phase_variance(&phase_sums(3, &a, &loads)));
    }
    assert_eq!(phase_variance(&phase_sums(3, &out, &loads)), best);
}
