//! Scenario-runner CLI: run a scenario, compare baseline vs controlled,
//! host a standalone MQTT broker, or calibrate the rot rate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use onionstore::harness::{calibrate_rot_rate, compare, run_scenario, HarnessError, Scenario};
use onionstore::mqtt::Broker;

/// Environment variable overriding the scenario's broker address.
const MQTT_ADDR_ENV: &str = "ONIONSTORE_MQTT_ADDR";

#[derive(Parser)]
#[command(
    name = "onionstore",
    version,
    about = "Onion storage chamber digital twin"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file; writes the CSV log and a JSON report.
    Run {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Publish telemetry to this broker (overrides the scenario file and
        /// the ONIONSTORE_MQTT_ADDR environment variable).
        #[arg(long, value_name = "HOST:PORT")]
        mqtt: Option<String>,
    },
    /// Run the baseline and controlled variants of a scenario and print the
    /// spoilage and cost comparison.
    Compare {
        scenario: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Host a standalone MQTT 3.1.1 broker until interrupted.
    Broker {
        #[arg(long, default_value_t = 1883)]
        port: u16,
    },
    /// Bisect the rot rate until the uncontrolled baseline lands inside the
    /// target spoilage band; writes the rate to a sidecar file.
    Calibrate {
        scenario: PathBuf,
        #[arg(long = "target-low", default_value_t = 40.0)]
        target_low: f64,
        #[arg(long = "target-high", default_value_t = 45.0)]
        target_high: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 on usage errors; the contract here is exit 1
            // for anything the user can fix at the command line
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            mqtt,
        } => cmd_run(&scenario, &out, mqtt),
        Command::Compare { scenario, out } => cmd_compare(&scenario, &out),
        Command::Broker { port } => cmd_broker(port),
        Command::Calibrate {
            scenario,
            target_low,
            target_high,
        } => cmd_calibrate(&scenario, (target_low, target_high)),
    }
}

/// --mqtt flag beats the env var beats the scenario file.
fn apply_mqtt_override(scenario: &mut Scenario, flag: Option<String>) {
    let addr = flag.or_else(|| std::env::var(MQTT_ADDR_ENV).ok());
    if let Some(addr) = addr {
        scenario.telemetry.enabled = true;
        scenario.telemetry.broker_addr = addr;
    }
}

fn write_outputs(
    out_dir: &Path,
    id: &str,
    csv: &str,
    report_json: &str,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("{id}.csv")), csv)?;
    std::fs::write(out_dir.join(format!("{id}.report.json")), report_json)?;
    Ok(())
}

fn cmd_run(path: &Path, out: &Path, mqtt: Option<String>) -> Result<(), HarnessError> {
    let mut scenario = Scenario::from_path(path)?;
    apply_mqtt_override(&mut scenario, mqtt);
    let started = std::time::Instant::now();
    let output = run_scenario(&scenario)?;
    write_outputs(out, &scenario.id, &output.csv, &output.report.to_json())?;
    print!("{}", output.report);
    println!(
        "wrote {}/{{{id}.csv, {id}.report.json}} in {:.2} s",
        out.display(),
        started.elapsed().as_secs_f64(),
        id = scenario.id
    );
    Ok(())
}

fn cmd_compare(path: &Path, out: &Path) -> Result<(), HarnessError> {
    let scenario = Scenario::from_path(path)?;
    let baseline_scenario = scenario.with_controller(false);
    let controlled_scenario = scenario.with_controller(true);
    let baseline = run_scenario(&baseline_scenario)?;
    let controlled = run_scenario(&controlled_scenario)?;
    let comparison = compare(&baseline.report, &controlled.report, &scenario.cost)?;

    write_outputs(
        out,
        &baseline_scenario.id,
        &baseline.csv,
        &baseline.report.to_json(),
    )?;
    write_outputs(
        out,
        &controlled_scenario.id,
        &controlled.csv,
        &controlled.report.to_json(),
    )?;
    std::fs::write(
        out.join(format!("{}.compare.json", scenario.id)),
        comparison.to_json(),
    )?;

    print!("{}", baseline.report);
    print!("{}", controlled.report);
    print!("{comparison}");
    Ok(())
}

fn cmd_broker(port: u16) -> Result<(), HarnessError> {
    let handle = Broker::start(&format!("0.0.0.0:{port}"))?;
    println!("mqtt broker listening on {}", handle.local_addr());
    // serve until the process is killed
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}

fn cmd_calibrate(path: &Path, band: (f64, f64)) -> Result<(), HarnessError> {
    let scenario = Scenario::from_path(path)?;
    let outcome = calibrate_rot_rate(&scenario, band)?;
    println!(
        "calibrated rot_pct_per_day = {:.6} (baseline total {:.2}% in [{}, {}]%, {} runs)",
        outcome.rot_pct_per_day, outcome.achieved_total_pct, band.0, band.1, outcome.iterations
    );
    let sidecar = path.with_extension("calibrated.toml");
    let body = format!(
        "# written by `onionstore calibrate`\nrot_pct_per_day = {:.6}\nachieved_total_spoilage_pct = {:.4}\niterations = {}\n",
        outcome.rot_pct_per_day, outcome.achieved_total_pct, outcome.iterations
    );
    std::fs::write(&sidecar, body)?;
    println!("wrote {}", sidecar.display());
    Ok(())
}
