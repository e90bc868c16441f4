//! End-to-end tests of the command-line interface: exit codes, report
//! shape, byte-level determinism of the rational mode, and the localized
//! witnesses of the perturbed fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gittins::scenario::{
    f4_counterexample, perturbed_field_fixture, perturbed_martingale_fixture, scenario_c,
    ScenarioFile,
};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gittins"))
}

fn write_scenario(dir: &Path, file: &ScenarioFile) -> PathBuf {
    let path = dir.join(format!("{}.json", file.name));
    let text = serde_json::to_string_pretty(file).expect("scenario serializes");
    std::fs::write(&path, text + "\n").expect("fixture written");
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn value_emits_every_route_with_the_same_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let out = run(&["value", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], Value::Bool(true));
    let values = report["values"].as_array().expect("value routes");
    assert!(values.len() >= 5, "expected several routes, got {}", values.len());
    for v in values {
        assert_eq!(v["status"], "ok", "route {} not ok", v["route"]);
        assert_eq!(v["value"], "13/10", "route {} off", v["route"]);
    }
}

#[test]
fn retirement_at_the_cap_dominates_every_route() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let out = run(&["value", path.to_str().unwrap(), "--retirement", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    for v in report["values"].as_array().unwrap() {
        assert_eq!(v["value"], "5", "route {} off", v["route"]);
    }
}

#[test]
fn rational_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let verify = |_: ()| run(&["verify", path.to_str().unwrap()]);
    let a = verify(());
    let b = verify(());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let value = |_: ()| run(&["value", path.to_str().unwrap()]);
    assert_eq!(value(()).stdout, value(()).stdout);
}

#[test]
fn random_runs_are_reproducible_and_zero_count_passes() {
    let a = run(&["random", "--seed", "11", "2"]);
    let b = run(&["random", "--seed", "11", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = stdout_json(&a);
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);

    let empty = run(&["random", "--seed", "11", "0"]);
    assert_eq!(empty.status.code(), Some(0));
    let report = stdout_json(&empty);
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report["checks"].as_array().unwrap().is_empty());
}

#[test]
fn random_rejects_a_budget_below_the_census_cap() {
    let out = run(&["random", "--seed", "11", "--budget", "100", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn counterexample_fails_verification_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &f4_counterexample());
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], Value::Bool(false));
    let failed: Vec<&Value> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == Value::Bool(false))
        .collect();
    assert!(!failed.is_empty());
    assert!(
        failed.iter().any(|c| c["witness"].as_str().unwrap_or("").contains("!=")),
        "no intersection witness in {failed:?}"
    );
}

#[test]
fn perturbed_field_fails_the_fixed_point_at_the_seeded_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &perturbed_field_fixture());
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    let checks = report["checks"].as_array().unwrap();
    let broken = checks
        .iter()
        .find(|c| c["name"] == "bellman-fixed-point" && c["pass"] == Value::Bool(false))
        .expect("fixed-point check fails");
    assert!(broken["witness"].as_str().unwrap().contains("[1, 0]"));
}

#[test]
fn perturbed_table_fails_the_martingale_but_not_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &perturbed_martingale_fixture());
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["name"] == "p0:stopped-martingale" && c["pass"] == Value::Bool(false)));
    assert!(checks
        .iter()
        .any(|c| c["name"] == "p0:envelope-equals-enumeration"
            && c["pass"] == Value::Bool(true)));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let missing = run(&["verify", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let suite = run(&["verify", path.to_str().unwrap(), "--suite", "nope"]);
    assert_eq!(suite.status.code(), Some(2));
    let start = run(&["value", path.to_str().unwrap(), "--start", "nope"]);
    assert_eq!(start.status.code(), Some(2));

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    let parse = run(&["verify", garbled.to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn exhausted_budget_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let out = run(&["verify", path.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn float_mode_carries_timing_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &scenario_c());
    let out = run(&["value", path.to_str().unwrap(), "--mode", "float"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["mode"], "float");
    assert!(report["timing_ms"].is_u64() || report["timing_ms"].is_number());
    let rational = stdout_json(&run(&["value", path.to_str().unwrap()]));
    assert!(rational.get("timing_ms").is_none());
}

#[test]
fn validate_accepts_the_example_and_rejects_the_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_scenario(dir.path(), &scenario_c());
    let out = run(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bad = write_scenario(dir.path(), &f4_counterexample());
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
