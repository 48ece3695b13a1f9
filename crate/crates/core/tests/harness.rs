use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rtc_core::harness::{
    generate_synthetic_scenario, simulate_horizon, simulate_scenario, verify_run, write_outputs, GeneratorParams, Mode,
    RunConfig, RunSummary, SimParams, HOUSEHOLDS_CSV, VOLTAGES_CSV,
};
use rtc_core::model::load_scenario;
use rtc_core::powerflow::Direction;
use rtc_core::response::{best_response_within, relaxed_interval};

fn run(dir: &Path, scenario: &Path, mode: Mode, name: &str) -> RunSummary {
    let cfg = RunConfig {
        mode,
        scenario_path: scenario.to_path_buf(),
        output_dir: dir.join(name),
        seed: 7,
        overrides: BTreeMap::new(),
    };
    let s = simulate_horizon(&cfg).unwrap();
    write_outputs(&s, &cfg.output_dir).unwrap();
    s
}

fn write_default(dir: &Path, params: &GeneratorParams) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    generate_synthetic_scenario(params).unwrap().save(&path).unwrap();
    path
}

#[test]
fn critical_scenario_modes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_default(dir.path(), &GeneratorParams::default());
    let none = run(dir.path(), &path, Mode::NoControl, "none");
    let dps = run(dir.path(), &path, Mode::DpsOnly, "dps");
    let rtc = run(dir.path(), &path, Mode::RtcDps, "rtc");

    assert_eq!(none.rtc_slots().count(), 0);
    assert_eq!(dps.rtc_slots().count(), 0);
    let active: Vec<usize> = rtc.rtc_slots().map(|(s, _)| s.slot).collect();
    assert!(!active.is_empty());

    // One contiguous activation window per day.
    let mut by_day: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in &active {
        by_day.entry(t / 144).or_default().push(*t);
    }
    for slots in by_day.values() {
        assert_eq!(slots.last().unwrap() - slots[0] + 1, slots.len(), "{slots:?}");
    }

    let worst = |s: &RunSummary| active.iter().map(|&t| s.slots[t].max_v_dev).fold(0.0, f64::max);
    assert!(worst(&rtc) <= worst(&dps) + 1e-12);
    assert!(worst(&dps) <= worst(&none) + 1e-12);
    assert!(none.slots.iter().any(|s| s.violation));
    assert!(rtc.slots.iter().all(|s| !s.violation));
    assert!(!rtc.has_non_convergence());
    for (_, r) in rtc.rtc_slots() {
        assert!(r.iterations <= 60);
        assert!(r.max_regret <= 1e-4);
    }

    let report = verify_run(&dir.path().join("rtc")).unwrap();
    assert!(report.passed(), "{:?}", report.failures);
    assert_eq!(report.equilibria_checked, active.len());
    assert_eq!(report.households, 50);
}

#[test]
fn benign_no_control_applies_baseline_flows() {
    let params = GeneratorParams {
        households: 12,
        days: 2,
        pv_share: 0.0,
        ..GeneratorParams::default()
    };
    let scenario = generate_synthetic_scenario(&params).unwrap();
    let s = simulate_scenario(&scenario, Mode::NoControl, &SimParams::default(), 0).unwrap();
    assert_eq!(s.rtc_slots().count(), 0);
    for rec in &s.households {
        let idx = scenario.households.iter().position(|h| h.id == rec.household).unwrap();
        let st = scenario.household_state(idx, rec.slot, rec.e0);
        let x = best_response_within(&st, relaxed_interval(&st).0, 0.0, 0.0).x;
        assert_eq!(x, rec.x);
    }
}

#[test]
fn without_pv_control_never_targets_injection() {
    let params = GeneratorParams {
        households: 30,
        days: 2,
        pv_share: 0.0,
        ..GeneratorParams::default()
    };
    let scenario = generate_synthetic_scenario(&params).unwrap();
    let s = simulate_scenario(&scenario, Mode::RtcDps, &SimParams::default(), 0).unwrap();
    assert!(s.households.iter().all(|r| r.r >= 0.0));
    assert!(s.rtc_slots().all(|(_, r)| r.direction == Direction::Demand));
}

#[test]
fn outputs_are_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let params = GeneratorParams {
        households: 20,
        days: 2,
        ..GeneratorParams::default()
    };
    let path = write_default(dir.path(), &params);
    let other = tempfile::tempdir().unwrap();
    write_default(other.path(), &params);
    for name in ["scenario.toml", "scenario.profiles.csv", "scenario.commitments.csv"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(other.path().join(name)).unwrap(),
            "{name} differs"
        );
    }

    let a = run(dir.path(), &path, Mode::RtcDps, "a");
    run(dir.path(), &path, Mode::RtcDps, "b");
    for entry in fs::read_dir(dir.path().join("a")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(dir.path().join("a").join(&name)).unwrap(),
            fs::read(dir.path().join("b").join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let nodes = a.node_phase.len();
    let rows = fs::read_to_string(dir.path().join("a").join(VOLTAGES_CSV))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 2 * 144 * nodes);
}

#[test]
fn empty_summary_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let params = GeneratorParams {
        households: 3,
        days: 1,
        ..GeneratorParams::default()
    };
    let scenario = generate_synthetic_scenario(&params).unwrap();
    let mut s = simulate_scenario(&scenario, Mode::NoControl, &SimParams::default(), 0).unwrap();
    s.horizon = 0;
    s.slots.clear();
    s.households.clear();
    s.voltages.clear();
    s.currents.clear();
    let files = write_outputs(&s, dir.path()).unwrap();
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
        assert_eq!(fs::read_to_string(f).unwrap().lines().count(), 1, "{f:?}");
    }
}

#[test]
fn verify_flags_broken_battery_continuity() {
    let dir = tempfile::tempdir().unwrap();
    let params = GeneratorParams {
        households: 6,
        days: 1,
        ..GeneratorParams::default()
    };
    let path = write_default(dir.path(), &params);
    run(dir.path(), &path, Mode::NoControl, "run");
    assert!(verify_run(&dir.path().join("run")).unwrap().passed());

    let csv = dir.path().join("run").join(HOUSEHOLDS_CSV);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Row 40 belongs to a later slot; bump its stored energy.
    let mut cols: Vec<String> = lines[40].split(',').map(String::from).collect();
    let e0: f64 = cols[8].parse().unwrap();
    cols[8] = (e0 + 0.01).to_string();
    lines[40] = cols.join(",");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let report = verify_run(&dir.path().join("run")).unwrap();
    assert!(!report.passed());
}

#[test]
fn scenario_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let params = GeneratorParams {
        households: 8,
        days: 2,
        ..GeneratorParams::default()
    };
    let original = generate_synthetic_scenario(&params).unwrap();
    let path = dir.path().join("s.toml");
    original.save(&path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), original);
}

#[test]
fn overrides_are_validated() {
    let mut p = SimParams::default();
    p.set("beta_factor", "3").unwrap();
    assert_eq!(p.beta_factor, 3.0);
    assert!(p.set("gamma", "1.5").is_err());
    assert!(p.set("nonsense", "1").is_err());
    assert!(p.set("tol_u", "abc").is_err());
}
