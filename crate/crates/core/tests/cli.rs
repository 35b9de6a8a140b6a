//! End-to-end checks of the `onionstore` binary: exit codes, file outputs,
//! the compare flow, calibration sidecars, and the standalone broker.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use onionstore::mqtt::MqttClient;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onionstore"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// A short scenario file so CLI runs stay fast.
fn write_short_scenario(dir: &Path, id: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{id}.toml"));
    let body = format!(
        r#"
id = "{id}"
duration_s = 86400.0
dt_s = 60.0
seed = 7
controller_enabled = true

[ambient]
kind = "monsoon"

[initial]
temp_c = 32.0
rh_pct = 80.0
{extra}
"#
    );
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_short_scenario(dir.path(), "cli-run", "");
    let out_dir = dir.path().join("out");

    let output = bin()
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let csv = std::fs::read_to_string(out_dir.join("cli-run.csv")).unwrap();
    assert!(csv.starts_with("t_s,temp_c,rh_pct,gas_ppm,regime,"));
    assert_eq!(csv.lines().count(), 1441, "header plus one row per tick");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("cli-run.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["scenario_id"], "cli-run");
    assert!(report["total_spoilage_pct"].as_f64().unwrap() >= 0.0);

    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("run report: cli-run"));
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let output = bin()
        .args(["run", "whatever.toml", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");

    let output = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn invalid_scenario_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "id = \"x\"\nnot_a_key = true\n").unwrap();
    let output = bin()
        .args(["run", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));

    // missing file is also a user-fixable input problem
    let output = bin()
        .args(["run", "/nonexistent/nowhere.toml"])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "IO failure is a runtime error"
    );
}

#[test]
fn compare_prints_both_totals_and_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_short_scenario(dir.path(), "cli-cmp", "");
    let out_dir = dir.path().join("out");

    let output = bin()
        .args([
            "compare",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("cli-cmp-baseline"));
    assert!(stdout.contains("cli-cmp-controlled"));
    assert!(stdout.contains("reduction"));
    assert!(stdout.contains("cold storage"));

    for name in [
        "cli-cmp-baseline.csv",
        "cli-cmp-controlled.csv",
        "cli-cmp.compare.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("cli-cmp.compare.json")).unwrap(),
    )
    .unwrap();
    assert!(
        cmp["baseline_spoilage_pct"].as_f64().unwrap()
            >= cmp["controlled_spoilage_pct"].as_f64().unwrap()
    );
    assert_eq!(cmp["options"].as_array().unwrap().len(), 3);
}

#[test]
fn calibrate_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    // pathogen-free, 10 days: the [0, 5] %/day search range can reach 40-45%
    let scenario = dir.path().join("cli-cal.toml");
    std::fs::write(
        &scenario,
        r#"
id = "cli-cal"
duration_s = 864000.0
dt_s = 60.0
seed = 7
controller_enabled = false

[ambient]
kind = "monsoon"

[initial]
temp_c = 32.0
rh_pct = 80.0

[spoilage]
rot_pathogen_coupling = 0.0
mold_growth_rate_per_day = 0.0
"#,
    )
    .unwrap();
    let output = bin()
        .args([
            "calibrate",
            scenario.to_str().unwrap(),
            "--target-low",
            "40",
            "--target-high",
            "45",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let sidecar = dir.path().join("cli-cal.calibrated.toml");
    let body = std::fs::read_to_string(&sidecar).unwrap();
    assert!(body.contains("rot_pct_per_day"));
    let value: toml::Value = toml::from_str(&body).unwrap();
    let rate = value["rot_pct_per_day"].as_float().unwrap();
    let achieved = value["achieved_total_spoilage_pct"].as_float().unwrap();
    assert!((40.0..=45.0).contains(&achieved));
    assert!(rate > 0.0);
}

#[test]
fn calibrate_reports_unreachable_band() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_short_scenario(dir.path(), "cli-cal-bad", "");
    let output = bin()
        .args([
            "calibrate",
            scenario.to_str().unwrap(),
            "--target-low",
            "0",
            "--target-high",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("calibration"));
}

#[test]
fn broker_subcommand_serves_mqtt() {
    let mut child = bin()
        .args(["broker", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    assert!(addr.contains(':'), "unexpected banner: {line}");

    let mut client = MqttClient::connect(&addr, "cli-broker-test", 10).unwrap();
    client.ping().unwrap();
    client.subscribe("x/#", 0).unwrap();
    drop(client);

    child.kill().unwrap();
    let _ = child.wait();
}

#[test]
fn bundled_scenarios_load_and_match_presets() {
    let dir = scenarios_dir();
    for name in [
        "monsoon.toml",
        "diurnal.toml",
        "constant.toml",
        "reference.toml",
        "csv_week.toml",
    ] {
        let scenario = onionstore::harness::Scenario::from_path(&dir.join(name))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        scenario.validate().unwrap();
    }
    // the monsoon file is exactly the in-code preset
    let from_file = onionstore::harness::Scenario::from_path(&dir.join("monsoon.toml")).unwrap();
    assert_eq!(
        from_file,
        onionstore::harness::Scenario::monsoon_preset(90.0, true)
    );
}

#[test]
fn run_with_mqtt_flag_publishes() {
    let broker = onionstore::mqtt::Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();
    let mut subscriber = MqttClient::connect(&addr, "cli-observer", 30).unwrap();
    subscriber.subscribe("store/#", 0).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let scenario = write_short_scenario(dir.path(), "cli-mqtt", "");
    let out_dir = dir.path().join("out");
    let output = bin()
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--mqtt",
            &addr,
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("telemetry:"),
        "report should mention telemetry: {stdout}"
    );

    let got = subscriber.recv_timeout(Duration::from_secs(2)).unwrap();
    assert!(got.is_some(), "no telemetry arrived at the broker");
    broker.stop();
}

#[test]
fn mqtt_env_var_overrides_scenario() {
    let broker = onionstore::mqtt::Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();
    let mut subscriber = MqttClient::connect(&addr, "env-observer", 30).unwrap();
    subscriber.subscribe("store/#", 0).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let scenario = write_short_scenario(dir.path(), "cli-env", "");
    let output = bin()
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .env("ONIONSTORE_MQTT_ADDR", &addr)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let got = subscriber.recv_timeout(Duration::from_secs(2)).unwrap();
    assert!(got.is_some(), "env var override did not enable telemetry");
    broker.stop();
}
