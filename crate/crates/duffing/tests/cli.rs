use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use duffing::manifest::{RunManifest, RunStatus};
use duffing_core::SpecialFunctions;
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn duffing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duffing")).args(args).output().expect("binary runs")
}

fn run_in(out: &Path, cfg: &str, extra: &[&str]) -> Output {
    let cfg = config(cfg);
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    duffing(&args)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn manifest_ok(dir: &Path) -> RunManifest {
    let m = RunManifest::read(dir).unwrap();
    assert_eq!(m.status, RunStatus::Ok, "{m:?}");
    assert!(m.missing_outputs(dir).is_empty(), "{m:?}");
    m
}

#[test]
fn simulate_unforced_records_two_impulses_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "unforced", &["simulate", "--t-end", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("impulses_000.csv"));
    assert_eq!(header, ["t_j", "x", "y_minus", "y_plus"]);
    assert_eq!(rows.len(), 20);
    let (header, rows) = csv_rows(&dir.path().join("trajectory_000.csv"));
    assert_eq!(header, ["t", "x", "y"]);
    assert_eq!(rows.last().unwrap()[0], "10.0");
    let text = fs::read(dir.path().join("trajectory_000.csv")).unwrap();
    assert!(!text.contains(&b'\r'));
    let m = manifest_ok(dir.path());
    assert_eq!(m.command, "simulate");
    assert_eq!(m.config_hash.as_ref().unwrap().len(), 64);
}

#[test]
fn identical_invocations_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let grid = "lambda=1:100:log:3,theta=0:1:2";
    let args = ["--seed-grid", grid, "simulate", "--t-end", "3"];
    let one = run_in(a.path(), "forced", &[&["--jobs", "1"], &args[..]].concat());
    let many = run_in(b.path(), "forced", &[&["--jobs", "4"], &args[..]].concat());
    assert!(one.status.success() && many.status.success());
    let files = manifest_ok(a.path()).outputs;
    assert_eq!(files.len(), 13);
    for f in files {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("unforced")).unwrap().replacen("\"n\": 1", "\"n\": 1, \"bogus\": true", 1);
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = duffing(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validation"));
    assert_eq!(RunManifest::read(&out_dir).unwrap().status, RunStatus::Failed);

    let out = duffing(&["--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = duffing(&["--config", "/nonexistent.json", "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(4));
    let out = duffing(&["--config", path.to_str().unwrap(), "simulate", "--t-end", "soon"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn twist_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "unforced", &["twist", "--lambda-min", "1", "--lambda-max", "1000", "--points", "7"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("twist_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["sign_ok"], true);
    assert_eq!(v["degenerate"], false);
    let (header, rows) = csv_rows(&dir.path().join("twist.csv"));
    assert_eq!(header, ["lambda", "I", "delta_theta", "d_delta_theta_d_I", "sign_ok"]);
    assert_eq!(rows.len(), 7);

    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), "degenerate", &["twist"]).status.success());
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("twist_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["degenerate"], true);
    let (_, rows) = csv_rows(&dir.path().join("twist.csv"));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap().abs() <= 1e-7));
}

#[test]
fn rotation_matches_closed_form_when_unforced() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "unforced", &["--seed-grid", "lambda=1:1000:log:4,theta=0.1", "analyze", "rotation"]);
    assert!(out.status.success());
    let sf = SpecialFunctions::compute(1, 1e-10).unwrap();
    let (header, rows) = csv_rows(&dir.path().join("rotation.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let lambda: f64 = r[col("lambda")].parse().unwrap();
        let rho: f64 = r[col("rotation")].parse().unwrap();
        // schedule (0.25, 0.5): factor 1 - 2 (t2 - t1) = 1/2
        let oracle = 2.0 * sf.beta() * sf.d() * lambda.powf(2.0 * sf.beta() - 1.0) * 0.5;
        assert!((rho - oracle).abs() <= 1e-8, "{lambda}: {rho} vs {oracle}");
    }
    let records: Value = serde_json::from_slice(&fs::read(dir.path().join("rotation.json")).unwrap()).unwrap();
    let m = manifest_ok(dir.path());
    assert_eq!(records.as_array().unwrap().len(), 4);
    assert_eq!(records[0]["config_hash"], Value::String(m.config_hash.unwrap()));
    assert_eq!(records[0]["parameters"]["iterates"], 2000);
}

#[test]
fn unforced_curves_are_exact_circles() {
    let dir = tempfile::tempdir().unwrap();
    // one-period advance close to the golden mean, away from low-order resonances
    let out = run_in(dir.path(), "unforced", &["--seed-grid", "lambda=1924.3,theta=0:1:2", "analyze", "curve"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("curves.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for r in &rows {
        assert_eq!(r[col("accepted")], "true");
        assert!(r[col("residual")].parse::<f64>().unwrap() <= 1e-7);
    }
    let (header, pts) = csv_rows(&dir.path().join("curve_000.csv"));
    assert_eq!(header, ["xi", "lambda", "theta"]);
    assert_eq!(pts.len(), 256);
}

#[test]
fn forced_fixed_points_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        "forced",
        &["--seed-grid", "lambda=8060,theta=0:1:4", "analyze", "periodic", "--period", "1", "--winding", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Value = serde_json::from_slice(&fs::read(dir.path().join("periodic.json")).unwrap()).unwrap();
    let orbits = records.as_array().unwrap();
    assert!(!orbits.is_empty());
    for o in orbits {
        assert!(o["residual"].as_f64().unwrap() <= 1e-9);
        assert_eq!(o["minimal"], true);
        assert_eq!(o["period"], 1);
    }
}

#[test]
fn empty_periodic_search_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        "unforced",
        &["--seed-grid", "lambda=10", "analyze", "periodic", "--period", "1", "--winding", "7"],
    );
    assert_eq!(out.status.code(), Some(3));
    let m = RunManifest::read(dir.path()).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert!(m.failure.unwrap().contains("best residual"));
    let (_, rows) = csv_rows(&dir.path().join("periodic.csv"));
    assert!(rows.is_empty());
}

#[test]
fn bounded_scan_with_bracket() {
    let dir = tempfile::tempdir().unwrap();
    // bracketing curves with advances near 0.600 and 0.640
    let out = run_in(
        dir.path(),
        "forced",
        &["--seed-grid", "lambda=1900", "analyze", "bounded", "--horizon", "300", "--bracket", "1748.7:2112.8"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("bounded.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows[0][col("stayed_between")], "true");
    assert_eq!(rows[0][col("escaped")], "false");
    assert_eq!(rows[0][col("iterations")], "300");
}

#[test]
fn special_dump_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = duffing(&["--out", out.to_str().unwrap(), "--cache", cache.to_str().unwrap(), "special", "--n", "1"]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
    assert_eq!(fs::read(a.join("special.csv")).unwrap(), fs::read(b.join("special.csv")).unwrap());
    let (header, rows) = csv_rows(&a.join("special.csv"));
    assert_eq!(header, ["tau", "C", "S"]);
    assert_eq!(rows.len(), 8193);
    let v: Value = serde_json::from_slice(&fs::read(a.join("special.json")).unwrap()).unwrap();
    assert!((v["period"].as_f64().unwrap() - 7.416298709205).abs() < 1e-9);

    let o = duffing(&["--out", a.to_str().unwrap(), "special"]);
    assert_eq!(o.status.code(), Some(2));
}
