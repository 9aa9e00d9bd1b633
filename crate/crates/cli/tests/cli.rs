use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lcsbench(args: &[&str]) -> Output {
    lcsbench_env(args, &[])
}

fn lcsbench_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lcsbench"));
    cmd.args(args).env_remove("LCS_TOL_SCALE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn export(name: &str, dir: &Path) -> String {
    let path = dir.join(format!("{name}.json"));
    let p = path.to_str().unwrap().to_string();
    assert_eq!(lcsbench(&["export", name, &p]).status.code(), Some(0));
    p
}

#[test]
fn list_names_every_scenario() {
    let out = lcsbench(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in lcsbench::gallery::NAMES {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn exported_scenario_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let p = export("cn_standard", dir.path());
    let out = lcsbench(&["run", &p]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["total"]["fail"], 0);
    assert_eq!(v["scenarios"][0]["scenario"], "cn_standard");
}

#[test]
fn checks_filter_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = export("hopf", dir.path());
    let out_path = dir.path().join("report.csv");
    let out = lcsbench(&[
        "run",
        &p,
        "--checks",
        "lcs.condition,contact.reeb",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(out_path).unwrap();
    let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ids, ["contact.reeb", "lcs.condition"]);
}

#[test]
fn text_format_has_totals() {
    let dir = tempfile::tempdir().unwrap();
    let p = export("fixture_affine_plane", dir.path());
    let out = lcsbench(&["run", &p, "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("total: "));
}

#[test]
fn wrong_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = export("cn_standard", dir.path());
    let text = std::fs::read_to_string(&p).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["expected"][0]["value"] = Value::from(2.0);
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    let out = lcsbench(&["run", &p, "--checks", "action.momentum_at_unit_vector"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tolerance_scale_is_read_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = export("hopf", dir.path());
    let args = ["run", &p, "--checks", "contact.reeb"];
    let loose: Value = serde_json::from_slice(&lcsbench_env(&args, &[("LCS_TOL_SCALE", "10")]).stdout).unwrap();
    assert_eq!(loose["scenarios"][0]["tolerance_scale"], 10.0);
    assert_eq!(loose["scenarios"][0]["checks"][0]["tolerance"], 1e-8);
    let tight = lcsbench_env(&args, &[("LCS_TOL_SCALE", "1e-30")]);
    assert_eq!(tight.status.code(), Some(1));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(lcsbench(&["run", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(lcsbench(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    let p = export("cn_standard", dir.path());
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    v["version"] = Value::from(99);
    std::fs::write(&p, v.to_string()).unwrap();
    assert_eq!(lcsbench(&["run", &p]).status.code(), Some(2));

    assert_eq!(lcsbench(&["export", "no_such", "x.json"]).status.code(), Some(2));
    assert_eq!(lcsbench(&["suite", "--filter", "astrology"]).status.code(), Some(2));
    assert_eq!(lcsbench(&["frobnicate"]).status.code(), Some(2));
    let out = lcsbench_env(&["suite", "--filter", "expr"], &[("LCS_TOL_SCALE", "-1")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn suite_filter_restricts_modules() {
    let out = lcsbench(&["suite", "--filter", "lck", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let modules = v["summary"]["modules"].as_object().unwrap();
    assert_eq!(modules.keys().collect::<Vec<_>>(), ["lck"]);
    assert_eq!(v["scenarios"][0]["seed"], 3);
}

#[test]
fn suite_is_byte_identical_across_runs() {
    let a = lcsbench(&["suite", "--seed", "7"]);
    let b = lcsbench(&["suite", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert!(a.stdout == b.stdout, "suite output differs between runs");
}
