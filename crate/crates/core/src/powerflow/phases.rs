//! Greedy dynamic phase allocation.

/// Population variance of per-phase sums.
pub fn phase_variance(sums: &[f64]) -> f64 {
    if sums.is_empty() {
        return 0.0;
    }
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n
}

/// Net load per phase for an assignment given as phase positions.
pub fn phase_sums(n_phases: usize, assignment: &[usize], net_loads: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; n_phases];
    for (&p, &l) in assignment.iter().zip(net_loads) {
        sums[p] += l;
    }
    sums
}

/// Reassigns switchable households to phases.
///
/// Fixed households stay where they are; switchable ones are placed in
/// descending order of `|net load|`, each on the phase that minimises the
/// variance of the per-phase sums (lowest phase on ties). If the result is
/// less balanced than `current`, `current` is kept.
pub fn rebalance_phases(n_phases: usize, current: &[usize], switchable: &[bool], net_loads: &[f64]) -> Vec<usize> {
    assert_eq!(current.len(), switchable.len());
    assert_eq!(current.len(), net_loads.len());
    if n_phases == 0 || !switchable.iter().any(|&s| s) {
        return current.to_vec();
    }
    let mut sums = vec![0.0; n_phases];
    for i in 0..current.len() {
        if !switchable[i] {
            sums[current[i]] += net_loads[i];
        }
    }
    let mut movable: Vec<usize> = (0..current.len()).filter(|&i| switchable[i]).collect();
    movable.sort_by(|&a, &b| net_loads[b].abs().total_cmp(&net_loads[a].abs()));

    let mut out = current.to_vec();
    for i in movable {
        let mut best = (0, f64::INFINITY);
        for p in 0..n_phases {
            sums[p] += net_loads[i];
            let v = phase_variance(&sums);
            sums[p] -= net_loads[i];
            if v < best.1 - 1e-12 {
                best = (p, v);
            }
        }
        out[i] = best.0;
        sums[best.0] += net_loads[i];
    }

    let before = phase_variance(&phase_sums(n_phases, current, net_loads));
    let after = phase_variance(&sums);
    if after <= before {
        out
    } else {
        current.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_load_goes_to_empty_phase() {
        let current = [1, 2, 0];
        let switchable = [false, false, true];
        let loads = [5.0, 5.0, 3.0];
        assert_eq!(rebalance_phases(3, &current, &switchable, &loads)[2], 0);
    }

    #[test]
    fn equal_loads_spread_and_match_exhaustive_search() {
        let loads = [2.0, 2.0, 2.0];
        let got = rebalance_phases(3, &[0, 0, 0], &[true; 3], &loads);
        let mut sorted = got.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);

        let mut best = f64::INFINITY;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    best = best.min(phase_variance(&phase_sums(3, &[a, b, c], &loads)));
                }
            }
        }
        assert_eq!(phase_variance(&phase_sums(3, &got, &loads)), best);
    }

    #[test]
    fn nothing_switchable_is_identity() {
        let current = [0, 1, 1, 2];
        assert_eq!(
            rebalance_phases(3, &current, &[false; 4], &[1.0, -2.0, 3.0, 0.5]),
            current.to_vec()
        );
    }

    proptest! {
        #[test]
        fn never_increases_variance(
            rows in proptest::collection::vec((0usize..3, any::<bool>(), -5.0f64..5.0), 0..40)
        ) {
            let current: Vec<usize> = rows.iter().map(|r| r.0).collect();
            let switchable: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let loads: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let out = rebalance_phases(3, &current, &switchable, &loads);
            let before = phase_variance(&phase_sums(3, &current, &loads));
            let after = phase_variance(&phase_sums(3, &out, &loads));
            prop_assert!(after <= before + 1e-9);
            for i in 0..rows.len() {
                if !switchable[i] {
                    prop_assert_eq!(out[i], current[i]);
                }
            }
        }
    }
}
