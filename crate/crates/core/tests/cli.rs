use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mentangle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mentangle"))
        .args(args)
        .output()
        .expect("spawn mentangle")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

fn run_ok(args: &[&str]) -> Value {
    let out = mentangle(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout_json(&out)
}

const SEPARABLE: &str = "[fixture]\nkind = \"separable_gaussian\"\neta = 0.1\nphoton_width = 0.2\n";

#[test]
fn exported_amplitude_is_normalized() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        "[params]\ndelta = 0.1\neta = 0.1\ncoherence_r = 0.0\n[output]\nformats = [\"csv\"]\n",
    );
    let out = tmp.path().join("amp");
    run_ok(&[
        "amplitude",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid-scale",
        "0.5",
    ]);
    let csv = fs::read_to_string(out.join("grid.csv")).unwrap();
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("dq,dk,weight,re,im"));
    let norm: f64 = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            v[2] * (v[3] * v[3] + v[4] * v[4])
        })
        .sum();
    assert!((norm - 1.0).abs() < 1e-10, "norm {norm}");
}

#[test]
fn separable_fixture_reports_unit_ratios() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sep.toml", SEPARABLE);
    let out = tmp.path().join("sep");
    let line = run_ok(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let h = &line["headline"];
    assert!((h["r"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((h["k"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((h["pe"].as_f64().unwrap() - 2.2).abs() < 1e-9);

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "mentangle/report/v1");
}

#[test]
fn rerun_reproduces_headline_and_validate_catches_tampering() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "sep.toml", SEPARABLE);
    let out = tmp.path().join("run");
    run_ok(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    let manifest = out.join("manifest.json");
    let replay = run_ok(&["rerun", manifest.to_str().unwrap()]);
    assert_eq!(replay["identical_headline"], true);
    assert_eq!(replay["changed_outputs"].as_array().unwrap().len(), 0);

    let v = run_ok(&["validate", out.to_str().unwrap()]);
    assert!(v["problems"].as_array().unwrap().is_empty());

    let report = out.join("report.json");
    let text = fs::read_to_string(&report).unwrap();
    fs::write(&report, text.replacen("\"k\"", "\"k_tampered\"", 1)).unwrap();
    let bad = mentangle(&["validate", out.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(!stdout_json(&bad)["problems"].as_array().unwrap().is_empty());
}

#[test]
fn modes_request_is_clamped_to_rank() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.toml", &format!("{SEPARABLE}[modes]\nn_modes = 5\n"));
    let out = tmp.path().join("modes");
    let line = run_ok(&[
        "modes",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let warnings = line["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| w.as_str().unwrap().contains("only 1")),
        "{warnings:?}"
    );
    assert!(out.join("mode_1_atomic.csv").exists());
    assert!(!out.join("mode_2_atomic.csv").exists());
    assert!(out.join("eigenvalues.csv").exists());
}

#[test]
fn invalid_parameters_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[params]\ndelta = 0.05\neta = -0.1\n");
    let out = mentangle(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["code"], "invalid_params");
    assert_eq!(err["error"]["exit_code"], 2);
}

#[test]
fn trapped_state_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.toml",
        "[params]\ndelta = 0.0\neta = 0.1\ncoherence_r = 0.0\n",
    );
    let out = mentangle(&[
        "report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["code"], "zero_amplitude");
}

#[test]
fn empty_scan_axis_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[params]\ndelta = 0.05\neta = 0.1\n[scan]\nmetric = \"r\"\nr = []\ntheta = [1.0]\n",
    );
    let out = mentangle(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["code"], "config");
}

#[test]
fn unknown_recipe_is_rejected() {
    let out = mentangle(&["reproduce", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown recipe"));
}
