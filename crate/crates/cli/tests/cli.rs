use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn termhedge(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_termhedge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// The single run directory under `out` whose name starts with `command`.
fn run_dir(out: &Path, command: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(command))
        .collect();
    assert_eq!(dirs.len(), 1, "expected one {command} run in {}", out.display());
    dirs.pop().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn hedge_is_bit_identical_across_runs_and_thread_counts() {
    let config = scenario("holee_call.json");
    let config = config.to_str().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = termhedge(tmp.path(), &["hedge", "--config", config, "--seed", "42", "--threads", threads]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let dir = run_dir(tmp.path(), "hedge");
        files.push((std::fs::read(dir.join("report.json")).unwrap(), std::fs::read(dir.join("hedge_weights.csv")).unwrap()));
    }
    assert!(files[0] == files[1]);
    let csv = String::from_utf8(files[0].1.clone()).unwrap();
    assert!(csv.starts_with("t,maturity,weight,stderr\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn report_records_hash_seed_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario("defaults.json");
    let out = termhedge(tmp.path(), &["price", "--config", config.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let dir = run_dir(tmp.path(), "price");
    let r = report(&dir);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["seed"], 7);
    let hash = r["scenario_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(dir.file_name().unwrap().to_string_lossy().ends_with(&hash[..16]));

    let other = tempfile::tempdir().unwrap();
    termhedge(other.path(), &["price", "--config", config.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(report(&run_dir(other.path(), "price"))["scenario_hash"].as_str().unwrap(), hash);
}

#[test]
fn verify_reports_the_sobolev_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario("defaults.json");
    let out = termhedge(tmp.path(), &["verify", "--config", config.to_str().unwrap(), "--criteria", "1,10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let c = &report(&run_dir(tmp.path(), "verify"))["result"]["sobolev_constants"];
    assert!((c["C_v"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((c["C_w"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
    assert!((c["C_vw"].as_f64().unwrap() - 0.25).abs() < 1e-6);
}

#[test]
fn finite_factor_replication_fails_support_beyond_the_underlying() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario("counterintuitive_352025.json");
    let out = termhedge(tmp.path(), &["replicate", "--config", config.to_str().unwrap(), "--override", "mc.n_outer=20"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = run_dir(tmp.path(), "replicate");
    let r = report(&dir);
    assert_eq!(r["result"]["support_verdict"], "fail beyond 7y");
    assert_eq!(r["result"]["report"]["method"], "finite_factor");
    let csv = std::fs::read_to_string(dir.join("hedge_weights.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.split(',').nth(1) == Some("25.0")));
}

#[test]
fn nested_local_replication_keeps_weights_inside_the_underlying() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario("local_call.json");
    let out = termhedge(
        tmp.path(),
        &["replicate", "--config", config.to_str().unwrap(), "--override", "mc.n_outer=4", "--override", "mc.steps=8"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&run_dir(tmp.path(), "replicate"));
    assert_eq!(r["result"]["support_verdict"], "pass");
    assert_eq!(r["result"]["report"]["method"], "clark_ocone_nested");
}

#[test]
fn simulate_writes_paths_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenario("defaults.json");
    let out = termhedge(
        tmp.path(),
        &["simulate", "--config", config.to_str().unwrap(), "--paths", "--override", "mc.n_outer=3"],
    );
    assert_eq!(out.status.code(), Some(0));
    let dir = run_dir(tmp.path(), "simulate");
    let paths = std::fs::read_to_string(dir.join("paths.csv")).unwrap();
    assert!(paths.starts_with("path_id,t,maturity,value\n"));
    // 3 paths, 41 recorded states, 21 nodes
    assert_eq!(paths.lines().count(), 1 + 3 * 41 * 21);
    assert_eq!(report(&dir)["result"]["frozen_exact"], true);
}

#[test]
fn table_writes_one_row_per_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = termhedge(tmp.path(), &["table", "--criteria", "1,10", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(run_dir(tmp.path(), "table").join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "id,name,pass,seconds,checks");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,sobolev constants,true,"));
}

#[test]
fn exit_codes_distinguish_parse_precondition_and_budget_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let defaults = scenario("defaults.json");
    let defaults = defaults.to_str().unwrap();
    let code = |args: &[&str]| termhedge(tmp.path(), args).status.code();
    assert_eq!(code(&["price", "--config", bad.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["price", "--config", defaults, "--override", "mc.unknown=1"]), Some(2));
    assert_eq!(code(&["price"]), Some(2));
    assert_eq!(code(&["table", "--criteria", "11"]), Some(2));
    assert_eq!(code(&["price", "--config", defaults, "--override", "payout.expiry=2.25"]), Some(3));
    assert_eq!(code(&["hedge", "--config", defaults, "--override", "hedge.method=finite_factor"]), Some(3));
    let local = scenario("local_call.json");
    assert_eq!(code(&["replicate", "--config", local.to_str().unwrap(), "--override", "mc.cost_cap=1"]), Some(4));
}
