use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomita-fock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_catalog_and_file() {
    let v = json(&["validate", "-c", "fib"]);
    assert_eq!(v["ok"], true);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let d = v["dims"][1].as_f64().unwrap();
    assert!((d - phi).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"labels\": [").unwrap();
    assert_eq!(run(&["validate", "-c", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["validate", "-c", "no-such-category"]).status.code(), Some(2));
}

#[test]
fn inconsistent_lambda_is_input_error() {
    let out = run(&["validate", "-c", "fib", "-l", "t=2,t~=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn semicircle_moments() {
    let v = json(&["moments", "-c", "trivial", "--xi", "1,1,1,0", "-w", "gsg", "-w", "(gsg)^2", "-w", "g^3"]);
    let rows = v.as_array().unwrap();
    let re: Vec<f64> = rows.iter().map(|r| r["matrix_re"].as_f64().unwrap()).collect();
    assert_eq!(re, [1.0, 2.0, 0.0]);
    for r in rows {
        assert!(r["difference"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn shallow_depth_is_rejected() {
    let out = run(&["moments", "-c", "trivial", "--xi", "1,1,1,0", "-w", "(gsg)^2", "-d", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_verdicts() {
    let v = json(&["classify", "-c", "fib"]);
    assert_eq!(v["verdict"]["type"], "II_1");
    let v = json(&["classify", "-c", "fib", "-l", "t=2"]);
    assert_eq!(v["verdict_label"], "III_{1/2}");
    let v = json(&["classify", "-c", "zwindow:6"]);
    assert_eq!(v["verdict"]["type"], "II_inf");
    assert_eq!(v["stabilization"]["stable"], true);
}

#[test]
fn spectrum_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("hist.csv");
    let v = json(&[
        "spectrum", "-c", "trivial", "-l", "1=1/4", "--xi", "1,1,1,0", "-k", "3",
        "--histogram", hist.to_str().unwrap(),
    ]);
    assert_eq!(v["lambda"].as_f64(), Some(0.25));
    let m2 = v["moments"][1]["fock"].as_f64().unwrap();
    assert!((m2 - 1.25).abs() < 1e-12);
    assert_eq!(v["histogram"]["within_bound"], true);
    assert_eq!(v["histogram"]["label"], "APPROXIMATE");
    assert!(fs::read_to_string(hist).unwrap().lines().count() > 1);
}

#[test]
fn output_is_deterministic() {
    let args = ["moments", "-c", "fib", "-l", "t=2", "--xi", "1,t,t,0", "-w", "(gsg)^3", "-w", "gsggsg"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gamma.csv");
    let out = run(&["gamma", "-c", "fib", "--xi", "1,t,t,0", "-d", "3", "--format", "csv", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(path).unwrap().lines().count() > 1);
}

#[test]
fn threads_variable_is_checked() {
    let out = Command::new(env!("CARGO_BIN_EXE_tomita-fock"))
        .args(["validate", "-c", "fib"])
        .env("TOMITA_FOCK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
