//! End-to-end runs of the `symgeo` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use symgeo_core::scenarios::{by_name, SCENARIO_NAMES};
use symgeo_core::SystemConfig;
use tempfile::TempDir;

fn symgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symgeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn default_json() -> serde_json::Value {
    let cfg = by_name("k3p3").expect("built-in").expect("valid");
    serde_json::to_value(&cfg).expect("serializable")
}

fn write_json(dir: &TempDir, name: &str, v: &serde_json::Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn check_default_passes() {
    let out = symgeo(&["check", "k3p3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn check_writes_report_in_both_formats() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("r.json");
    let csv_out = dir.path().join("r.csv");
    assert_eq!(code(&symgeo(&["check", "k3p3", "--out", path_str(&json)])), 0);
    assert_eq!(
        code(&symgeo(&[
            "check",
            "k3p3",
            "--out",
            path_str(&csv_out),
            "--format",
            "csv"
        ])),
        0
    );
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["passes"], serde_json::Value::Bool(true));
    let rows = csv_rows(&csv_out);
    let overall = rows.iter().find(|r| &r[0] == "overall").expect("overall row");
    assert_eq!(&overall[2], "true");
}

#[test]
fn oversized_coupling_bound_fails_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let mut v = default_json();
    // C_K^2 = 4 against mu_L mu_R = 1.
    v["declared"]["coupling_bound"] = serde_json::json!(2.0);
    let p = write_json(&dir, "cb.json", &v);
    let out = symgeo(&["check", path_str(&p)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("small_gain"), "{}", stderr(&out));
}

#[test]
fn missing_config_exits_two() {
    let out = symgeo(&["check", "/nonexistent/config.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn parse_error_reports_location() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{\n  \"version\": 1,\n  \"arch\": [\n").unwrap();
    let out = symgeo(&["check", path_str(&p)]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("bad.json:"), "{msg}");
    assert!(msg.contains(":3:") || msg.contains(":4:"), "{msg}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mut v = default_json();
    v["declared"]["mu_x"] = serde_json::json!(1.0);
    let p = write_json(&dir, "extra.json", &v);
    let out = symgeo(&["check", path_str(&p)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("mu_x"), "{}", stderr(&out));
}

#[test]
fn invalid_dt_override_exits_two() {
    let out = symgeo(&["check", "k3p3", "--dt", "10"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("dt"));
}

#[test]
fn zero_steps_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("t.csv");
    let out = symgeo(&["simulate", "k3p3", "--steps", "0", "--out", path_str(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("step,time,residual,principal_error,lyapunov,violations,"));
    assert!(dir.path().join("t.csv.run.json").is_file());
}

#[test]
fn simulate_records_every_nth_step_without_violations() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("t.csv");
    let out = symgeo(&[
        "simulate",
        "k3p3",
        "--steps",
        "1000",
        "--every",
        "250",
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&out_path);
    let steps: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(steps, ["250", "500", "750", "1000"]);
    assert!(rows.iter().all(|r| &r[5] == "0"));
    let v: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] <= w[0]), "{v:?}");
}

#[test]
fn json_output_embeds_manifest() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("t.json");
    let out = symgeo(&[
        "simulate",
        "k3p3",
        "--steps",
        "10",
        "--format",
        "json",
        "--seed",
        "7",
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["manifest"]["seed"], 7);
    assert_eq!(doc["samples"].as_array().unwrap().len(), 10);
    assert!(doc["aborted"].is_null());
}

#[test]
fn non_finite_state_aborts_with_exit_three() {
    let dir = TempDir::new().unwrap();
    let cfg = by_name("k3p3-valuation").expect("built-in").expect("valid");
    let mut v = serde_json::to_value(&cfg).unwrap();
    // A finite but huge drive overflows the first update.
    v["input"]["drive"] = serde_json::json!({ "kind": "constant", "u": [1e308] });
    v["arch"]["n_u"] = serde_json::json!(1);
    let p = write_json(&dir, "nan.json", &v);
    let out_path = dir.path().join("t.csv");
    let out = symgeo(&["simulate", path_str(&p), "--steps", "10", "--out", path_str(&out_path)]);
    if code(&out) == 2 {
        panic!("config rejected, adjust the overflow case: {}", stderr(&out));
    }
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("at step 0"), "{}", stderr(&out));
    assert!(out_path.is_file());
}

#[test]
fn resume_matches_straight_run() {
    let dir = TempDir::new().unwrap();
    let (a, b, c, ck) = (
        dir.path().join("a.csv"),
        dir.path().join("b.csv"),
        dir.path().join("c.csv"),
        dir.path().join("ck.json"),
    );
    let run = |args: &[&str]| {
        let out = symgeo(args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    };
    run(&[
        "simulate",
        "k3p3",
        "--steps",
        "300",
        "--out",
        path_str(&a),
        "--checkpoint",
        path_str(&ck),
    ]);
    run(&[
        "simulate",
        "k3p3",
        "--steps",
        "200",
        "--out",
        path_str(&b),
        "--resume",
        path_str(&ck),
    ]);
    run(&["simulate", "k3p3", "--steps", "500", "--out", path_str(&c)]);
    let mut split = csv_rows(&a);
    split.extend(csv_rows(&b));
    let straight = csv_rows(&c);
    assert_eq!(split.len(), straight.len());
    for (s, t) in split.iter().zip(&straight) {
        assert_eq!(s, t, "step {}", &t[0]);
    }
}

#[test]
fn resume_rejects_other_config() {
    let dir = TempDir::new().unwrap();
    let (a, ck) = (dir.path().join("a.csv"), dir.path().join("ck.json"));
    let out = symgeo(&[
        "simulate",
        "k3p3",
        "--steps",
        "5",
        "--out",
        path_str(&a),
        "--checkpoint",
        path_str(&ck),
    ]);
    assert_eq!(code(&out), 0);
    let out = symgeo(&[
        "simulate",
        "k3p3-full",
        "--steps",
        "5",
        "--out",
        path_str(&a),
        "--resume",
        path_str(&ck),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn long_default_run_converges() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("t.csv");
    let out = symgeo(&[
        "simulate",
        "k3p3",
        "--steps",
        "100000",
        "--every",
        "100000",
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&out_path);
    assert_eq!(rows.len(), 1);
    let err: f64 = rows[0][3].parse().unwrap();
    assert!(err <= 1e-6, "final principal error {err}");
}

#[test]
fn delay_sweep_converges_everywhere() {
    let out = symgeo(&[
        "sweep",
        "k3p3",
        "--grid",
        "tau=0,0.5,2,10",
        "--steps",
        "100000",
        "--pairs",
        "500",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(&row[col("certificates_ok")], "true");
        assert_eq!(&row[col("converged")], "true");
        assert_eq!(&row[col("oscillating")], "false");
    }
}

#[test]
fn coupling_sweep_crosses_small_gain_threshold() {
    // With mu = 1 the threshold is C_K = 1, reached at k + sigma = 2 / sqrt(15).
    let out = symgeo(&[
        "sweep",
        "k3p3",
        "--grid",
        "k=0.3,0.6",
        "--steps",
        "10",
        "--pairs",
        "200",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    let c_k: Vec<f64> = rows.iter().map(|x| x[col("c_k")].parse().unwrap()).collect();
    assert!(c_k[0] < 1.0 && c_k[1] > 1.0, "{c_k:?}");
    assert_eq!(&rows[0][col("small_gain_ok")], "true");
    assert_eq!(&rows[1][col("small_gain_ok")], "false");
}

#[test]
fn empty_grid_gives_empty_table() {
    let out = symgeo(&["sweep", "k3p3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
}

#[test]
fn oversized_grid_exits_two() {
    let out = symgeo(&["sweep", "k3p3", "--grid", "tau=0:1:100", "--grid", "k=0.1:0.2:10"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--max-points"));
}

#[test]
fn family_parameter_needs_builtin_family() {
    let dir = TempDir::new().unwrap();
    let mut v = default_json();
    v["declared"]["mu_p"] = serde_json::json!(2.0);
    let p = write_json(&dir, "custom.json", &v);
    let out = symgeo(&["sweep", path_str(&p), "--grid", "k=0.1", "--steps", "1"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn shipped_scenarios_match_builtins() {
    for name in SCENARIO_NAMES {
        let file = match name {
            "k3p3" => scenarios_dir().join("k3p3-default.json"),
            other => scenarios_dir().join(format!("{other}.json")),
        };
        let text = fs::read_to_string(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
        let shipped: SystemConfig = serde_json::from_str(&text).unwrap();
        let builtin = by_name(name).unwrap().unwrap();
        assert_eq!(shipped, builtin, "{name}");
    }
}

#[test]
fn scenario_output_reloads_identically() {
    let dir = TempDir::new().unwrap();
    for name in SCENARIO_NAMES {
        let p = dir.path().join(format!("{name}.json"));
        let out = symgeo(&["scenario", name, "--out", path_str(&p)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let cfg: SystemConfig = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(cfg, by_name(name).unwrap().unwrap());
    }
    let out = symgeo(&["scenario", "--list"]);
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().collect::<Vec<_>>(), SCENARIO_NAMES);
}
