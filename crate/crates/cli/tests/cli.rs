//! End-to-end tests against the built binary: exit codes, report schema,
//! determinism, and JSON/CSV content parity.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localmodel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_chart_single_config_passes() {
    let out = run(&["verify-chart", "--case", "odd-m", "--n", "7", "--s", "2"]);
    assert!(out.status.success());
    let report = json_of(&out);
    assert_eq!(report["version"].as_str().unwrap().split('+').next(), Some("1"));
    assert_eq!(report["command"], "verify-chart");
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["status"] != "fail"));
    // rs = 10 free variables
    let dims = report["dims"].as_array().unwrap();
    assert_eq!(dims[0]["dim"], 10);
    assert_eq!(dims[0]["expected"], 10);
}

#[test]
fn verify_chart_sweep_passes() {
    let out = run(&["verify-chart", "--sweep", "--max-n", "6"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["status"] != "fail"));
}

#[test]
fn verify_chart_rejects_even_n_for_odd_case() {
    let out = run(&["verify-chart", "--case", "odd-m", "--n", "4", "--s", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("odd"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["verify-chart", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_counts_match_parameter_space() {
    let out = run(&["oracle", "--n", "3", "--s", "1", "--q", "2,3"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let counts = report["counts"].as_array().unwrap();
    let raw: Vec<u64> = counts
        .iter()
        .filter(|c| c["label"].as_str().unwrap().contains("raw"))
        .map(|c| c["count"].as_u64().unwrap())
        .collect();
    assert_eq!(raw, vec![4, 9]);
}

#[test]
fn oracle_nilpotent_char_two_fails_with_exit_one() {
    // The raw scheme over F_2[pi]/(pi^2) is strictly larger than the
    // parameter space, so the equality check fails: exit code 1.
    let out = run(&["oracle", "--n", "3", "--s", "1", "--q", "2", "--fiber", "nilpotent"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json_of(&out);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
}

#[test]
fn census_zero_fiber_dimension() {
    let out = run(&["census", "--zero-fiber", "--m", "2", "--s", "2", "--q", "3,5"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let dims = report["dims"].as_array().unwrap();
    assert_eq!(dims[0]["dim"], 4);
    assert_eq!(dims[0]["expected"], 4);
}

#[test]
fn census_budget_exhaustion_is_usage_error() {
    let out = run(&["census", "--zero-fiber", "--m", "4", "--s", "2", "--q", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn census_n_scheme_dimension() {
    let out = run(&["census", "--n-scheme", "--m", "1", "--s", "1", "--q", "3,5"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let dims = report["dims"].as_array().unwrap();
    let largest = dims.iter().find(|d| d["label"] == "largest stratum").unwrap();
    assert_eq!(largest["dim"], 2);
    assert_eq!(largest["expected"], 2);
}

#[test]
fn census_fibers_mode() {
    let out = run(&["census", "--fibers", "--m", "2", "--s", "2", "--q", "3"]);
    assert!(out.status.success());
    let report = json_of(&out);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));
}

#[test]
fn symplectic_property_runs() {
    let out = run(&["symplectic", "--sizes", "4", "--q", "5", "--trials", "50", "--seed", "7"]);
    assert!(out.status.success());
    let report = json_of(&out);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c["status"] == "pass"));
    assert!(checks.iter().all(|c| c["detail"] == "50/50"));
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let args = ["census", "--n-scheme", "--m", "2", "--s", "1", "--q", "3,5", "--seed", "3"];
    let mut a = json_of(&run(&args));
    let mut b = json_of(&run(&args));
    a["wall_ms"] = 0.into();
    b["wall_ms"] = 0.into();
    assert_eq!(a, b);
}

#[test]
fn csv_and_json_carry_identical_content() {
    let json_out = run(&["oracle", "--n", "3", "--s", "1", "--q", "3"]);
    let csv_out = run(&["oracle", "--n", "3", "--s", "1", "--q", "3", "--format", "csv"]);
    assert!(json_out.status.success() && csv_out.status.success());
    let report = json_of(&json_out);
    let csv = String::from_utf8_lossy(&csv_out.stdout);
    // Every check and count row of the JSON report appears in the CSV.
    for c in report["checks"].as_array().unwrap() {
        let name = c["name"].as_str().unwrap();
        assert!(csv.contains(name) || csv.contains(&format!("\"{name}\"")), "missing {name}");
    }
    for c in report["counts"].as_array().unwrap() {
        let label = c["label"].as_str().unwrap();
        let count = c["count"].as_u64().unwrap();
        assert!(csv.lines().any(|l| l.contains(label) && l.contains(&count.to_string())));
    }
    assert!(csv.starts_with("section,name,q,value,status,detail"));
}

#[test]
fn output_file_flag_writes_report() {
    let dir = std::env::temp_dir().join(format!("localmodel-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = run(&[
        "verify-chart", "--case", "even-m", "--n", "4", "--s", "2",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    // r = s configuration: the wedge check is skipped.
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"].as_str().unwrap().contains("WF") && c["status"] == "skip"));
    std::fs::remove_dir_all(&dir).unwrap();
}
