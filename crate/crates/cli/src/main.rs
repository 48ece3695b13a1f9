use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtc_core::error::{Error, ScenarioError};
use rtc_core::harness::{
    generate_synthetic_scenario, simulate_horizon, verify_run, write_outputs, GeneratorParams, Mode, RunConfig,
};
use tracing_subscriber::EnvFilter;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Real-time control of residential flows on a low-voltage feeder.
#[derive(Parser)]
#[command(name = "rtc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the run artefacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// no-control, dps-only or rtc+dps
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Parameter override, repeatable (e.g. --set beta_factor=6).
        #[arg(long = "set", value_parser = parse_kv)]
        overrides: Vec<(String, String)>,
    },
    /// Generate a synthetic scenario.
    Gen {
        #[arg(long, default_value_t = 50)]
        households: usize,
        #[arg(long, default_value_t = 0.8)]
        pv: f64,
        #[arg(long, default_value_t = 0.6)]
        battery: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        days: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check battery continuity and equilibria of a finished run.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Scenario(ScenarioError::Io { .. }) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run {
            scenario,
            mode,
            out,
            seed,
            overrides,
        } => {
            let cfg = RunConfig {
                mode,
                scenario_path: scenario,
                output_dir: out,
                seed,
                overrides: overrides.into_iter().collect::<BTreeMap<_, _>>(),
            };
            let summary = simulate_horizon(&cfg)?;
            write_outputs(&summary, &cfg.output_dir)?;
            let rtc = summary.rtc_slots().count();
            let violations = summary.slots.iter().filter(|s| s.violation).count();
            let worst_v = summary.slots.iter().map(|s| s.max_v_dev).fold(0.0, f64::max);
            let worst_i = summary.slots.iter().map(|s| s.max_i_frac).fold(0.0, f64::max);
            println!(
                "{mode}: {} slots, {rtc} coordinated, {violations} violating, max voltage deviation {:.2} %, max loading {:.1} %",
                summary.horizon,
                100.0 * worst_v,
                100.0 * worst_i
            );
            if summary.has_non_convergence() {
                eprintln!("coordination did not converge in some slots; see slots.csv");
                return Ok(EXIT_NON_CONVERGENCE);
            }
            Ok(0)
        }
        Command::Gen {
            households,
            pv,
            battery,
            seed,
            days,
            out,
        } => {
            let params = GeneratorParams {
                households,
                pv_share: pv,
                battery_share: battery,
                seed,
                days,
                ..GeneratorParams::default()
            };
            let scenario = generate_synthetic_scenario(&params)?;
            scenario.save(&out).map_err(Error::from)?;
            println!(
                "wrote {} ({} households, {} slots)",
                out.display(),
                households,
                scenario.horizon
            );
            Ok(0)
        }
        Command::Verify { run } => {
            let report = verify_run(&run)?;
            println!(
                "{} households, {} slots, {} equilibria re-checked, max regret {:.3e}, max bound violation {:.3e}, {} non-converged",
                report.households,
                report.slots,
                report.equilibria_checked,
                report.max_regret,
                report.max_constraint_violation,
                report.non_converged_slots
            );
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            if !report.passed() {
                return Ok(EXIT_VALIDATION);
            }
            if report.non_converged_slots > 0 {
                return Ok(EXIT_NON_CONVERGENCE);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
