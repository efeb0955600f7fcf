use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn holdercone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holdercone"))
        .args(args)
        .env("HOLDERCONE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_affine_reports_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "analyze",
        "--function",
        r#"{"family":"affine_plus","q":0.5}"#,
        "--beta",
        "2",
        "--grid-level",
        "14",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("analysis.json"));
    let semi = v["flatness"]["value"].as_f64().unwrap();
    assert!((semi - 2.0).abs() < 1e-4, "{v}");
}

#[test]
fn analyze_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "analyze",
        "--function",
        r#"{"family":"power","gamma":3}"#,
        "--beta",
        "3",
        "--out",
        out_arg(dir.path()),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("analysis.csv")).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    let semi: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("flatness_seminorm,"))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((semi - 27.0).abs() < 1e-9, "{text}");
}

#[test]
fn analyze_outside_the_cone_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "analyze",
        "--function",
        r#"{"family":"power","gamma":1}"#,
        "--beta",
        "2",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = fs::read_to_string(dir.path().join("analysis.json")).unwrap();
    assert!(text.contains("\"inf\""), "{text}");
}

#[test]
fn function_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    fs::write(&path, r#"{"family":"flat_family","beta":4,"delta":0.1}"#).unwrap();
    let out = holdercone(&[
        "analyze",
        "--function",
        path.to_str().unwrap(),
        "--beta",
        "4",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    for function in [r#"{"family":"power""#, r#"{"family":"cubic"}"#, "/no/such/file.json"] {
        let out = holdercone(&["analyze", "--function", function, "--beta", "2", "--out", out_arg(dir.path())]);
        assert_eq!(out.status.code(), Some(1), "{function}");
        assert!(!out.stderr.is_empty());
    }
    let out = holdercone(&["analyze", "--beta", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decay_of_a_constant_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "decay",
        "--function",
        r#"{"family":"constant","c":1}"#,
        "--beta",
        "2",
        "--grid-level",
        "10",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = read_json(&dir.path().join("fit.json"));
    assert_eq!(fit["degenerate_fit"], Value::Bool(true));
    let levels = fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    let mut lines = levels.lines();
    assert_eq!(lines.next(), Some("j,level_sup,bound_value"));
    for line in lines {
        let sup: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(sup, 0.0, "{line}");
    }
}

#[test]
fn decay_csv_writes_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "decay",
        "--function",
        r#"{"family":"shifted_square","x0":0.5}"#,
        "--beta",
        "2",
        "--grid-level",
        "12",
        "--boundary",
        "periodized",
        "--format",
        "csv",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let fit = read_json(&dir.path().join("fit.json"));
    let est = fit["regularity_estimate"].as_f64().unwrap();
    assert!((0.8..1.3).contains(&est), "{fit}");
    let coeffs = fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("j,k,coefficient,interior\n"));
    // details on levels 4..=11
    assert_eq!(coeffs.lines().count() - 1, (1 << 12) - (1 << 4));
}

#[test]
fn decay_beyond_the_wavelet_order_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = holdercone(&[
        "decay",
        "--function",
        r#"{"family":"power","gamma":3}"#,
        "--alpha",
        "1",
        "--beta",
        "3",
        "--wavelet-order",
        "2",
        "--out",
        out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |f: &'static str, budget: &'static str| {
        vec![
            "certify", "--function", f, "--beta", "4", "--grid-level", "12", "--budget", budget, "--out",
        ]
    };
    let flat = r#"{"family":"flat_family","beta":4,"delta":0.1}"#;
    let mut a = args(flat, "50");
    a.push(out_arg(dir.path()));
    assert_eq!(holdercone(&a).status.code(), Some(0));
    let reports = read_json(&dir.path().join("certify.json"));
    assert_eq!(reports[0]["claim_id"], "MainTheorem");

    let mut a = args(flat, "1e-9");
    a.push(out_arg(dir.path()));
    assert_eq!(holdercone(&a).status.code(), Some(3));

    let mut a = args(r#"{"family":"power","gamma":1}"#, "50");
    a.push(out_arg(dir.path()));
    assert_eq!(holdercone(&a).status.code(), Some(2));
}

#[test]
fn suite_with_impossible_budget_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.json");
    fs::write(
        &config,
        r#"{
            "grid_level": 8,
            "wavelet_level": 10,
            "budgets": {"main": 1e-9},
            "cases": [{"function": {"family": "flat_family", "beta": 4, "delta": 0.1}, "beta": 4}],
            "counterexample": false
        }"#,
    )
    .unwrap();
    let out = holdercone(&["suite", "--config", config.to_str().unwrap(), "--out", out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = read_json(&dir.path().join("suite_report.json"));
    let main = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["claim_id"] == "MainTheorem")
        .unwrap();
    assert_eq!(main["verdict"], "fail");
    assert!(!main["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn suite_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = holdercone(&["suite", "--config", missing.to_str().unwrap(), "--out", out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"cases": [], "grid_levle": 9}"#).unwrap();
    let out = holdercone(&["suite", "--config", bad.to_str().unwrap(), "--out", out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid_levle"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(holdercone(&["--help"]).status.code(), Some(0));
    assert_eq!(holdercone(&["--version"]).status.code(), Some(0));
    assert_eq!(holdercone(&["frobnicate"]).status.code(), Some(1));
}
