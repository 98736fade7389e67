use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use freeent::cli::{BallRow, EntropyInputs, StatRow};
use freeent::entropy::EntropyReport;
use freeent::report::ExperimentReport;

fn freeent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeent")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = freeent(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn sample_shift_is_all_zero() {
    let text = ok(&["sample", "--ensemble", r#"{"kind":"shift","dim":100}"#]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| *r == "0,0"), "{rows:?}");
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        ok(&["sample", "--ensemble", r#"{"kind":"ginibre","dim":500}"#, "--seed", "11", "--out", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read(&a).lines().count(), 501);
    let other = ok(&["sample", "--ensemble", r#"{"kind":"ginibre","dim":500}"#, "--seed", "12"]);
    assert_ne!(other, read(&a));
}

#[test]
fn sample_sidecar_names_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dt.csv");
    let spec = r#"{"kind":"dt","dim":300,"measure":{"kind":"point_mass","at":[0,0]},"offdiag":1}"#;
    ok(&["sample", "--ensemble", spec, "--seed", "5", "--out", out.to_str().unwrap()]);
    for row in csv_rows(&read(&out)) {
        let (re, im): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!(re.hypot(im) < 1e-8);
    }
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("dt.csv.meta.json"))).unwrap();
    assert_eq!(meta["meta"]["tool"], "freeent");
    assert_eq!(meta["meta"]["seed"], 5);
    assert_eq!(meta["inputs"]["ensemble"]["kind"], "dt");
    assert_eq!(meta["inputs"]["ensemble"]["dim"], 300);
    assert_eq!(meta["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn sample_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("plot.svg");
    ok(&["sample", "--ensemble", r#"{"kind":"ginibre","dim":40}"#, "--svg", svg.to_str().unwrap()]);
    let text = read(&svg);
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
}

#[test]
fn regularize_shift() {
    let text = ok(&[
        "regularize",
        "--ensemble",
        r#"{"kind":"shift","dim":500}"#,
        "--measure",
        r#"{"kind":"uniform_circle","radius":1}"#,
        "--t-grid",
        "0,1e-3",
        "--l",
        "1",
        "--trials",
        "10",
    ]);
    assert!(text.starts_with("t,mean_distance,std,trials\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    let d0: f64 = rows[0][1].parse().unwrap();
    let d1: f64 = rows[1][1].parse().unwrap();
    assert!((d0 - 1.0).abs() <= 1e-6, "{d0}");
    assert!(d1 <= 0.1, "{d1}");
    assert_eq!(rows[1][3], "10");
}

#[test]
fn regularize_row_count_matches_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 1, "ensemble": {"kind": "shift", "dim": 30}, "model": {"kind": "haar_unitary"},
            "t_grid": [0, 1e-4, 1e-3, 1e-2, 1e-1], "trials": 3, "l": 2}"#,
    )
    .unwrap();
    let svg_dir = dir.path().join("svg");
    let text = ok(&["regularize", "--config", cfg.to_str().unwrap(), "--svg", svg_dir.to_str().unwrap()]);
    assert_eq!(csv_rows(&text).len(), 5);
    assert!(svg_dir.join("distance.svg").exists());
    assert!(svg_dir.join("t04.svg").exists());
}

#[test]
fn ball_volume_rows_converge() {
    let text = ok(&["ball-volume", "--dims", "50,100,200", "--od", "1"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    let limit = 0.5 + (2.0 * PI).ln() / 2.0;
    let gaps: Vec<f64> = rows.iter().map(|r| (r[1].parse::<f64>().unwrap() - limit).abs()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] <= 0.02, "{gaps:?}");
}

#[test]
fn entropy_bound_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("entropy.json");
    let text = ok(&[
        "entropy-bound",
        "--measure",
        r#"{"kind":"uniform_disk","radius":1}"#,
        "--od",
        "0.5",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(text.contains("upper_bound"), "human summary on stdout: {text}");
    let json = read(&out);
    let report: ExperimentReport<EntropyInputs, StatRow, EntropyReport> = ExperimentReport::from_json(&json).unwrap();
    assert!((report.summary.upper_bound - (1.0 + PI.ln())).abs() <= 1e-10);
    assert_eq!(report.to_json().unwrap(), json);
}

#[test]
fn entropy_bound_point_mass_is_minus_infinity() {
    let text =
        ok(&["entropy-bound", "--measure", r#"{"kind":"point_mass","at":[0,0]}"#, "--od", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["summary"]["log_energy"], "-inf");
    assert_eq!(v["summary"]["upper_bound"], "-inf");
    let csv =
        ok(&["entropy-bound", "--measure", r#"{"kind":"point_mass","at":[0,0]}"#, "--od", "1", "--format", "csv"]);
    assert!(csv.contains("upper_bound,-inf"), "{csv}");
}

#[test]
fn ball_volume_json_round_trips() {
    let json = ok(&["ball-volume", "--dims", "2,10", "--format", "json", "--seed", "3"]);
    let report: ExperimentReport<serde_json::Value, BallRow, ()> = ExperimentReport::from_json(&json).unwrap();
    assert_eq!(report.rows.len(), 2);
    let n2 = 0.25 * (2.0 * PI).ln() + 2f64.ln() / 2.0;
    assert!((report.rows[0].value - n2).abs() < 1e-12);
    assert_eq!(report.to_json().unwrap(), json);
}

#[test]
fn schur_check_ginibre() {
    let text = ok(&["schur-check", "--ensemble", r#"{"kind":"ginibre","dim":400}"#, "--seed", "2"]);
    let get = |name: &str| -> f64 {
        csv_rows(&text).iter().find(|r| r[0] == name).unwrap_or_else(|| panic!("{name} missing"))[1].parse().unwrap()
    };
    assert!(get("re_variance_rel_error") <= 0.05);
    assert!((get("eigenvalue_mean_abs_sqr") - 0.5).abs() <= 0.05);
    assert!(get("residual") <= 1e-8);
}

#[test]
fn microstate_and_dt_verify_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 8, "ensemble": {"kind": "ginibre", "dim": 60}, "model": {"kind": "circular"},
            "microstate": {"radius": 3, "k": 3, "eps": 0.2, "improved": {"l": 2, "theta": 0.3}},
            "dims": [40, 80], "trials": 12}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = ok(&["microstate", "--config", cfg, "--format", "json"]);
    assert_eq!(a, ok(&["microstate", "--config", cfg, "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["summary"]["improved"], true);

    let dt = [
        "dt-verify",
        "--measure",
        r#"{"kind":"uniform_disk","radius":1}"#,
        "--od",
        "0.5",
        "--dims",
        "30,60",
        "--trials",
        "8",
        "--format",
        "json",
    ];
    let a = ok(&dt);
    assert_eq!(a, ok(&dt));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert!((v["summary"]["upper_bound"].as_f64().unwrap() - (1.0 + PI.ln())).abs() <= 1e-10);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn spectrum_reports_named_statistics() {
    let text =
        ok(&["spectrum", "--ensemble", r#"{"kind":"haar_unitary","dim":50}"#, "--model", r#"{"kind":"haar_unitary"}"#]);
    let rows = csv_rows(&text);
    let get = |name: &str| -> f64 { rows.iter().find(|r| r[0] == name).unwrap()[1].parse().unwrap() };
    assert!((get("operator_norm") - 1.0).abs() < 1e-8);
    assert!(get("offdiag_second_moment").abs() < 1e-8);
    assert!((get("fk_determinant") - 1.0).abs() < 1e-8);
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 1, "ensemble": {"kind": "ginibre", "dim": 5}, "trails": 3}"#).unwrap();
    let out = freeent(&["sample", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let out = freeent(&["sample"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble"));

    let out = freeent(&["sample", "--ensemble", r#"{"kind":"ginibre","dim":0}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble.dim"));

    let out = freeent(&["entropy-bound", "--measure", r#"{"kind":"uniform_disk","radius":1}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("od"));

    let out = freeent(&["sample", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.json"));
}

#[test]
fn numerical_failure_exits_with_3() {
    // Entries near f64::MAX overflow inside the eigensolver.
    let spec = r#"{"kind":"perturbed","scale":1,
        "base":{"kind":"dt","dim":20,"measure":{"kind":"uniform_disk","radius":1e308},"offdiag":1e300}}"#;
    let out = freeent(&["spectrum", "--ensemble", spec]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
