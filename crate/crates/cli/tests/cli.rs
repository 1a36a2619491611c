use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parabolica"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_pair(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: &str = r#"{"plus": {"points": [0.3]}, "minus": {"points": [0.55]}}"#;
const TWO_BY_TWO: &str = r#"{"plus": {"points": [0.1, 0.45]}, "minus": {"points": [0.2, 0.7]}}"#;
const SYNCHRONIZED: &str = r#"{"plus": {"points": [0.0, 0.5]}, "minus": {"points": [0.0, 0.5]}}"#;

/// CSV data rows, skipping the config line and the column header.
fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# parabolica "));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn classify_identical_files() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", TWO_BY_TWO);
    let out = run(&["classify", s(&a), s(&a)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["equivalent"], true);
    assert_eq!(v["shift"], 0.0);
    assert_eq!(v["non_synchronized"], serde_json::json!([true, true]));
    assert_eq!(v["config"]["tolerance"], 1e-12);
}

#[test]
fn classify_inequivalent_and_mismatched_pairs() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", r#"{"plus": {"points": [0, 0.1]}, "minus": {"points": [0, 0.3]}}"#);
    let b = write_pair(&dir, "b.json", r#"{"plus": {"points": [0, 0.5]}, "minus": {"points": [0, 0.1]}}"#);
    let v = json_out(&run(&["classify", s(&a), s(&b)]));
    assert_eq!(v["equivalent"], false);
    assert_eq!(v["shift"], Value::Null);

    let c = write_pair(&dir, "c.json", TOY);
    let v = json_out(&run(&["classify", s(&a), s(&c)]));
    assert_eq!(v["equivalent"], false);
    assert_eq!(v["reason"], "size");
}

#[test]
fn classify_uses_exact_arithmetic_for_rational_input() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", r#"{"plus": {"points": ["1/10", "9/20"]}, "minus": {"points": ["1/5", "7/10"]}}"#);
    let b = write_pair(&dir, "b.json", r#"{"plus": {"points": ["3/10", "13/20"]}, "minus": {"points": ["1/5", "7/10"]}}"#);
    let v = json_out(&run(&["classify", s(&a), s(&b)]));
    assert_eq!(v["arithmetic"], "exact");
    assert_eq!(v["equivalent"], true);
    assert!(v["shift_exact"].is_string());
}

#[test]
fn check_sync_reports_witness() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", TWO_BY_TWO);
    let b = write_pair(&dir, "b.json", SYNCHRONIZED);
    let v = json_out(&run(&["check-sync", s(&a), s(&b)]));
    assert_eq!(v["pairs"][0]["non_synchronized"], true);
    assert_eq!(v["pairs"][1]["non_synchronized"], false);
    assert_eq!(v["pairs"][1]["witness"], serde_json::json!([[0, 0], [1, 1]]));
}

#[test]
fn malformed_input_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let bad = write_pair(&dir, "bad.json", "{\"plus\": {\"points\": [0.1,]}}");
    let out = run(&["classify", s(&bad), s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "validation");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 1, column"));
}

#[test]
fn bifurcations_are_sorted_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", TWO_BY_TWO);
    let summary = dir.path().join("summary.json");
    let args = ["bifurcations", "--pair", s(&a), "--n", "5..9", "--summary", s(&summary)];
    let first = bin().args(args).env("PARABOLICA_THREADS", "1").output().unwrap();
    let second = bin().args(args).env("PARABOLICA_THREADS", "4").output().unwrap();
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let rows = csv_rows(&first);
    assert_eq!(rows.len(), 4 * 5);
    let eps: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[0] > w[1]));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["events"], 20);
}

#[test]
fn simulate_passes_rotation_check() {
    let out = run(&["simulate", "--epsilon", "0.01", "--from", "C-:0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["rotation_check"]["passed"], true);
    assert_eq!(v["landing"]["loop"], "+");

    let v = json_out(&run(&["simulate", "--epsilon", "-0.01"]));
    assert_eq!(v["return_map_fixed_points"].as_array().unwrap().len(), 2);

    let out = run(&["simulate", "--epsilon", "0", "--from", "C-:0.3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_matches_connection_equation() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", TWO_BY_TWO);
    let out = run(&["detect", "--pair", s(&a), "--eps", "0.01..0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    let compared: Vec<f64> = rows.iter().filter(|r| !r[5].is_empty()).map(|r| r[5].parse().unwrap()).collect();
    assert!(compared.len() >= 4 * 10);
    assert!(compared.iter().all(|&e| e < 1e-6), "{compared:?}");
}

#[test]
fn germ_recovers_square_field() {
    let out = run(&["germ", r#"{"kind":"moebius"}"#, "--samples", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 16);
    for r in rows {
        let (x, u): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!(x.abs() >= 0.02 - 1e-15 && x.abs() <= 0.2 + 1e-15);
        assert!((u - x * x).abs() < 1e-8, "x = {x}, u = {u}");
    }
    let out = run(&["germ", r#"{"kind":"flow","field":"x^3","a":0}"#]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn realize_writes_skeleton_and_svg() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", r#"{"plus": {"points": [0.1, 0.45]}, "minus": {"points": [0.2, 0.7], "classes": [[0, 1]]}}"#);
    let svg = dir.path().join("out.svg");
    let skeleton = dir.path().join("skeleton.json");
    let out = run(&["realize", "--pair", s(&a), "--svg", s(&svg), "--json", s(&skeleton)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_out(&out)["passed"], true);
    let sk: Value = serde_json::from_str(&std::fs::read_to_string(skeleton).unwrap()).unwrap();
    for disc in ["disc_minus", "disc_plus"] {
        for key in ["vertices", "edges", "faces"] {
            assert!(sk[disc][key].is_array(), "{disc}.{key}");
        }
        let v = &sk[disc]["vertices"][0];
        assert!(v["id"].is_number() && v["kind"].is_string());
    }
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn pipeline_toy_pair_passes() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "toy.json", TOY);
    let out = run(&["pipeline", "--pair", s(&a), "--n", "8..12"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["report"]["events"].as_array().unwrap().len(), 5);
    assert!(v["report"]["max_rel_err"].as_f64().unwrap() < 1e-6);
}

#[test]
fn pipeline_two_by_two_pair_passes() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "a.json", TWO_BY_TWO);
    let out = run(&["pipeline", "--pair", s(&a), "--n", "5..20"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["report"]["events"].as_array().unwrap().len(), 64);
}

#[test]
fn pipeline_random_pair_is_reproducible() {
    let args = ["pipeline", "--random", "2,2", "--seed", "11", "--n", "6..8"];
    let first = run(&args);
    let second = bin().args(args).env("PARABOLICA_THREADS", "2").output().unwrap();
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(json_out(&first)["config"]["seed"], 11);
}

#[test]
fn pipeline_rejects_synchronized_pair() {
    let dir = TempDir::new().unwrap();
    let a = write_pair(&dir, "sync.json", SYNCHRONIZED);
    let out = run(&["pipeline", "--pair", s(&a)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("synchronized"));
}
