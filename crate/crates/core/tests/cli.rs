//! End-to-end runs of the `semipart` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semipart::format::load_str;

fn semipart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semipart")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const THREE_CPU: &str = r#"{"cpus": 3, "K": 11, "tasks": [
    {"id": 1, "C": 968, "D": 1100, "T": 1100},
    {"id": 2, "C": 550, "D": 1100, "T": 1100},
    {"id": 3, "C": 473, "D": 1100, "T": 1100},
    {"id": 4, "C": 440, "D": 1100, "T": 1100},
    {"id": 5, "C": 440, "D": 1100, "T": 1100},
    {"id": 6, "C": 33, "D": 100, "T": 100}]}"#;

#[test]
fn gen_is_deterministic_and_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = semipart(&["gen", "--cpus", "2", "--util", "0.75", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let o = semipart(&["gen", "--cpus", "4", "--util", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let loaded = load_str(&stdout(&o)).unwrap();
    let total: f64 = loaded.system.tasks.iter().map(|t| t.wcet as f64 / t.period as f64).sum();
    assert!((total / 4.0 - 0.5).abs() <= loaded.system.tasks.len() as f64 / 800.0 + 1e-9);
    assert_eq!(loaded.k, semipart::cli::DEFAULT_K);
}

#[test]
fn gen_rejects_utilization_above_one() {
    let o = semipart(&["gen", "--cpus", "2", "--util", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let unwritable = dir.path().join("missing").join("x.json");
    let o = semipart(&["gen", "--util", "0.5", "--out", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_partitionable_system() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"{"cpus": 2, "K": 4, "tasks": [{"id": 1, "C": 2, "D": 5, "T": 5}, {"id": 2, "C": 3, "D": 10, "T": 10}]}"#,
    );
    let o = semipart(&["analyze", "--input", &input]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(!text.contains("migrating"), "{text}");
    assert!(text.contains("verdict: schedulable"));
}

#[test]
fn analyze_prints_sequence_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", THREE_CPU);
    let o = semipart(&["analyze", "--input", &input, "--mode", "packed"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("A row (4,2,5)"), "{text}");
    assert!(text.contains("σ = (π1,π2,π3,π1,π3,π3,π1,π2,π3,π1,π3)"), "{text}");

    let o = semipart(&["analyze", "--input", &input, "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "schedulable");
    assert_eq!(v["tasks"][5]["row"], serde_json::json!([4, 2, 5]));
    assert_eq!(v["cpus"][2]["multiframes"][0]["frames"], serde_json::json!([0, 0, 0, 33, 33, 0, 0, 33, 0, 33, 33]));
}

#[test]
fn analyze_without_migration_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", THREE_CPU);
    let o = semipart(&["analyze", "--input", &input, "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("task 6 could not be placed"));
}

#[test]
fn analyze_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"cpus": 1, "K": 1, "tasks": [{"id": 3, "C": 6, "D": 5, "T": 5}]}"#);
    let o = semipart(&["analyze", "--input", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("task 3: C exceeds D"));
    assert_eq!(semipart(&["analyze", "--input", "/nonexistent.json"]).status.code(), Some(2));
    let extra = write(
        dir.path(),
        "extra.json",
        r#"{"cpus": 1, "K": 1, "note": 1, "tasks": [{"id": 1, "C": 1, "D": 5, "T": 5}]}"#,
    );
    let o = semipart(&["analyze", "--input", &extra]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `note`"));
}

#[test]
fn plan_export_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", THREE_CPU);
    let plan = dir.path().join("plan.json");
    let plan = plan.to_str().unwrap();
    assert_eq!(semipart(&["analyze", "--input", &input, "--plan-out", plan]).status.code(), Some(0));
    let trace = dir.path().join("trace.txt");
    let o = semipart(&["simulate", "--input", &input, "--plan", plan, "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("simulated 2200 ticks"));
    let first = fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(first, "0 release 1 0 0");

    let o = semipart(&["simulate", "--input", &input, "--auto", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["misses"], serde_json::json!([]));
}

#[test]
fn simulate_overload_reports_first_miss() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"{"cpus": 1, "K": 1, "tasks": [{"id": 1, "C": 3, "D": 5, "T": 5}, {"id": 2, "C": 3, "D": 5, "T": 5}],
            "plan": {"fixed": [{"task": 1, "cpu": 0}, {"task": 2, "cpu": 0}], "migrating": []}}"#,
    );
    let o = semipart(&["simulate", "--input", &input, "--horizon", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("first miss at 5 (task 2 job 0)"), "{}", stdout(&o));
}

#[test]
fn simulate_rejects_malformed_plan() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", THREE_CPU);
    let plan =
        write(dir.path(), "p.json", r#"{"cpus": 3, "K": 11, "tasks": [], "plan": {"fixed": [{"task": 1, "cpu": 9}]}}"#);
    assert_eq!(semipart(&["simulate", "--input", &input, "--plan", &plan]).status.code(), Some(2));
    assert_eq!(semipart(&["simulate", "--input", &input]).status.code(), Some(2));
}

#[test]
fn experiment_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let args = [
        "experiment",
        "--cpus",
        "2",
        "--fractions",
        "0.9,0.95",
        "--k-values",
        "2",
        "--trials",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(semipart(&args).status.code(), Some(0));
    let table = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "m,fraction,K,mode,trials,successes,overflows,ratio");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("2,0.90,1,FFD,5,"));
    assert_eq!(semipart(&["experiment", "--fractions", "0.3"]).status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    let text = stdout(&semipart(&["analyze", "--help"]));
    assert!(text.contains("100000000"), "{text}");
    let text = stdout(&semipart(&["gen", "--help"]));
    assert!(text.contains("[default: 20]"), "{text}");
}
