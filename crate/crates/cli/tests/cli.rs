use std::path::Path;
use std::process::{Command, Output};

fn rtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtc")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_run_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("feeder.toml");
    let out = dir.path().join("run");

    let g = rtc(&[
        "gen",
        "--households",
        "20",
        "--days",
        "2",
        "--seed",
        "4",
        "--out",
        arg(&scenario),
    ]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert!(scenario.exists());

    let r = rtc(&[
        "run",
        "--scenario",
        arg(&scenario),
        "--mode",
        "rtc+dps",
        "--out",
        arg(&out),
        "--set",
        "gamma=0.6",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let line = String::from_utf8(r.stdout).unwrap();
    assert!(line.starts_with("rtc+dps: 288 slots"), "{line}");
    for f in [
        "voltages.csv",
        "currents.csv",
        "households.csv",
        "slots.csv",
        "equilibria.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let v = rtc(&["verify", "--run", arg(&out)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = dir.path().join("run");
    let r = rtc(&[
        "run",
        "--scenario",
        arg(&missing),
        "--mode",
        "no-control",
        "--out",
        arg(&out),
    ]);
    assert_eq!(r.status.code(), Some(3));

    let scenario = dir.path().join("s.toml");
    assert!(
        rtc(&["gen", "--households", "4", "--days", "1", "--out", arg(&scenario)])
            .status
            .success()
    );
    let r = rtc(&[
        "run",
        "--scenario",
        arg(&scenario),
        "--mode",
        "rtc+dps",
        "--out",
        arg(&out),
        "--set",
        "gamma=2",
    ]);
    assert_eq!(r.status.code(), Some(1));

    let g = rtc(&["gen", "--pv", "1.5", "--out", arg(&scenario)]);
    assert_eq!(g.status.code(), Some(1));

    // clap rejects unknown modes before anything runs.
    let r = rtc(&[
        "run",
        "--scenario",
        arg(&scenario),
        "--mode",
        "magic",
        "--out",
        arg(&out),
    ]);
    assert!(!r.status.success());
}
