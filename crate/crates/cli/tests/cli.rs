use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn iioss(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iioss")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn scalar_system() -> Value {
    json!({"A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "E": [[1.0]], "F": [[1.0]]})
}

#[test]
fn certify_scalar_with_zero_gain() {
    let dir = TempDir::new().unwrap();
    let sys = write(dir.path(), "sys.json", &scalar_system());
    let gain = write(dir.path(), "L.json", &json!([[0.0]]));
    let out = dir.path().join("cert.json");
    let o = iioss(
        &["certify", "--in", sys.to_str().unwrap(), "--gain-L", gain.to_str().unwrap(), "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!((cert["provenance"]["P"][0][0].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert!((cert["max"]["decrease_rate"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(cert["max"]["rho_y"].as_f64().unwrap(), 0.0);
    assert_eq!(cert["config"]["gain_L"], json!([[0.0]]));
}

#[test]
fn certify_failures() {
    let dir = TempDir::new().unwrap();
    let o = iioss(&["certify", "--in", "builtin:undetectable_demo"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1.1"));
    assert_eq!(code(&iioss(&["certify", "--in", "missing.json"], dir.path())), 1);
    assert_eq!(code(&iioss(&["certify"], dir.path())), 1);
    assert_eq!(code(&iioss(&["frobnicate"], dir.path())), 1);
}

fn scenario(extra: Value) -> Value {
    let mut v = json!({
        "system": {"builtin": "scalar_demo"},
        "trials": 1000,
        "horizon": 50,
        "family": {"kind": "mixed", "state_radius": 2.0, "signal_radius": 1.0}
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

#[test]
fn verify_scalar_demo_passes_and_writes_reports() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "scenario.json", &scenario(json!({})));
    let o = iioss(&["verify", "--in", sc.to_str().unwrap(), "--out", "report.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["violations"], 0);
    assert_eq!(report["config"]["trials"], 1000);
    assert_eq!(report["config"]["seed"], 0);
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,lhs,rhs,margin");
    assert_eq!(csv.lines().count(), 52);
    assert!(dir.path().join("report_max.csv").exists());
}

#[test]
fn verify_corrupted_certificate_exits_3() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "bad.json",
        &scenario(json!({
            "trials": 2,
            "bounds": "sum",
            "gamma_scale": 0.5,
            "family": {"kind": "fixed", "x0": [0.0], "chi0": [0.0],
                       "signals": {"w": {"kind": "step", "before": [1.0], "after": [0.0], "at": 1}}}
        })),
    );
    let o = iioss(&["verify", "--in", sc.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_zero_horizon_exits_1() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "t0.json", &scenario(json!({"horizon": 0})));
    assert_eq!(code(&iioss(&["verify", "--in", sc.to_str().unwrap()], dir.path())), 1);
    let ok = write(dir.path(), "ok.json", &scenario(json!({"trials": 3})));
    assert_eq!(code(&iioss(&["verify", "--in", ok.to_str().unwrap(), "--horizon", "0"], dir.path())), 1);
}

#[test]
fn verify_report_is_independent_of_threads() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "s.json", &scenario(json!({"trials": 200})));
    let s = sc.to_str().unwrap();
    assert_eq!(code(&iioss(&["verify", "--in", s, "--threads", "1", "--out", "one.json", "--seed", "7"], dir.path())), 0);
    assert_eq!(code(&iioss(&["verify", "--in", s, "--threads", "8", "--out", "eight.json", "--seed", "7"], dir.path())), 0);
    let a = fs::read(dir.path().join("one.json")).unwrap();
    let b = fs::read(dir.path().join("eight.json")).unwrap();
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["config"]["seed"], 7);
}

fn kappa_rows(dir: &Path, alpha3: Value) -> (i32, Vec<Vec<f64>>, String, String) {
    let p = write(dir, "alpha3.json", &alpha3);
    let o = iioss(&["kappa", "--in", p.to_str().unwrap(), "--out", "kappa.csv"], dir);
    let text = fs::read_to_string(dir.join("kappa.csv")).unwrap_or_default();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (code(&o), rows, header, String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn kappa_linear_cases() {
    let dir = TempDir::new().unwrap();
    for (slope, factor) in [(0.5, 0.75), (1.0, 0.5)] {
        let (c, rows, header, _) = kappa_rows(dir.path(), json!({"kind": "linear", "slope": slope}));
        assert_eq!(c, 0);
        assert!(header.starts_with("r,kappa,r_minus_alpha3"));
        assert_eq!(rows.len(), 1001);
        for row in rows {
            assert!((row[1] - factor * row[0]).abs() <= 1e-12 * row[0].max(1.0));
        }
    }
}

#[test]
fn kappa_premise_failure_warns() {
    let dir = TempDir::new().unwrap();
    let sq: Vec<[f64; 2]> = (0..=100).map(|i| i as f64 / 10.0).map(|r| [r, r * r]).collect();
    let (c, rows, header, stderr) =
        kappa_rows(dir.path(), json!({"alpha3": {"kind": "table", "points": sq}, "k": 0.5, "rows": 21}));
    assert_eq!(c, 0);
    assert_eq!(header, "r,kappa,r_minus_alpha3");
    assert_eq!(rows.len(), 21);
    assert!(stderr.contains("warning"));
}

#[test]
fn kappa_refinement_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let (c, ..) = kappa_rows(dir.path(), json!({"kind": "linear", "slope": 1e-18}));
    assert_eq!(c, 4);
}

fn observer_scenario(extra: Value) -> Value {
    let mut v = json!({
        "system": {"builtin": "scalar_demo"},
        "x0": [1.0],
        "x_hat0": [0.0],
        "signals": {"w": {"kind": "decaying_exp", "base": [1.0], "rate": 0.9}},
        "horizon": 200,
        "terminal_threshold": 1e-6
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

#[test]
fn observer_luenberger_and_offset() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "obs.json", &observer_scenario(json!({})));
    let o = iioss(&["observer", "--in", good.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("terminal error"));
    let bad = write(dir.path(), "bad.json", &observer_scenario(json!({"observer": {"kind": "offset", "offset": 0.1}})));
    let o = iioss(&["observer", "--in", bad.to_str().unwrap(), "--out", "bad_report.json"], dir.path());
    assert_eq!(code(&o), 3);
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bad_report.json")).unwrap()).unwrap();
    assert_eq!(r["injection"]["pass"], false);
}
