//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const PINNED: &str = r#"{
    "assets": 1,
    "maturities": [1.0],
    "grids": [[[0.5, 1.5]]],
    "options": [{"type": "put", "strike": 1.0, "maturity_index": 0, "price": 0.25}],
    "payoff": {"kind": "european", "params": {"func": {"type": "call", "strike": 1.0}, "asset": 0, "time": 1.0}}
}"#;

/// Two dates, so the superhedge needs dynamic trading.
const LOOKBACK: &str = r#"{
    "assets": 1,
    "maturities": [2.0],
    "times": [1.0, 2.0],
    "grids": [[[0.75, 1.25]], [[0.5, 1.0, 1.5]]],
    "options": [
        {"type": "put", "strike": 1.0, "maturity_index": 0, "price": 0.125},
        {"type": "put", "strike": 1.5, "maturity_index": 0, "price": 0.5}
    ],
    "payoff": {"kind": "lookback_max", "params": {"asset": 0}}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-bounds")).arg("--out").arg(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn results(dir: &Path) -> Vec<(String, f64, String)> {
    let mut r = csv::Reader::from_path(dir.join("results.csv")).unwrap();
    r.records().map(|rec| rec.unwrap()).map(|rec| (rec[0].to_string(), rec[1].parse().unwrap(), rec[2].to_string())).collect()
}

fn value(rows: &[(String, f64, String)], name: &str) -> f64 {
    rows.iter().find(|r| r.0 == name).unwrap_or_else(|| panic!("no row {name}")).1
}

#[test]
fn bounds_on_pinned_marginal_match_static_replication() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "spec.json", PINNED);
    let out = run(tmp.path(), &["bounds", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = results(tmp.path());
    assert!((value(&rows, "primal[eta=0]") - 0.25).abs() < 1e-9);
    assert!((value(&rows, "dual[eta=0]") - 0.25).abs() < 1e-9);
    for f in ["measure.csv", "strategy.csv", "static.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn inconsistent_prices_exit_with_certificate() {
    // a put at 1.5 priced 0.4 forces mean 1.1
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "spec.json", &PINNED.replace(r#""strike": 1.0, "maturity_index": 0, "price": 0.25"#, r#""strike": 1.5, "maturity_index": 0, "price": 0.4"#));
    let out = run(tmp.path(), &["bounds", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    let cert = fs::read_to_string(tmp.path().join("certificate.csv")).unwrap();
    assert!(cert.starts_with("row,multiplier"));
    assert!(cert.lines().count() > 1);
}

#[test]
fn malformed_path_csv_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let input = write(tmp.path(), "bad.csv", "t,s1\n0,1\n0.5,abc\n1,1.2\n");
    let out = run(tmp.path(), &["discretise", "--input", &input, "-n", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn path_budget_is_enforced() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "spec.json", &PINNED.replace(r#""assets": 1,"#, r#""assets": 1, "path_budget": 1,"#));
    let out = run(tmp.path(), &["bounds", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "spec.json", LOOKBACK);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(run(dir, &["bounds", "--spec", &spec]).status.code(), Some(0));
    }
    for f in ["results.csv", "measure.csv", "strategy.csv", "static.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn written_strategy_superhedges_and_its_negation_does_not() {
    let tmp = TempDir::new().unwrap();
    let spec = write(tmp.path(), "spec.json", LOOKBACK);
    let out = run(tmp.path(), &["bounds", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let strategy = tmp.path().join("strategy.csv");
    let statics = tmp.path().join("static.json");

    let check = tmp.path().join("check");
    let out = run(&check, &["verify", "--spec", &spec, "--strategy", strategy.to_str().unwrap(), "--static", statics.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("superhedges"));
    let mut r = csv::Reader::from_path(check.join("slacks.csv")).unwrap();
    let slacks: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert!(!slacks.is_empty());
    assert!(slacks.iter().all(|s| *s >= -1e-8), "{slacks:?}");

    // selling the hedge instead of holding it
    let held: serde_json::Value = serde_json::from_str(&fs::read_to_string(&statics).unwrap()).unwrap();
    let a0 = held["a0"].as_f64().unwrap();
    let holdings: Vec<f64> = held["holdings"].as_array().unwrap().iter().map(|h| -h.as_f64().unwrap()).collect();
    let flipped = write(tmp.path(), "flipped.json", &serde_json::json!({"a0": -a0, "holdings": holdings}).to_string());
    let mut rows = csv::Reader::from_path(&strategy).unwrap();
    let mut w = csv::Writer::from_path(tmp.path().join("flipped.csv")).unwrap();
    w.write_record(rows.headers().unwrap()).unwrap();
    for rec in rows.records() {
        let rec = rec.unwrap();
        let pos: f64 = rec[3].parse().unwrap();
        w.write_record([&rec[0], &rec[1], &rec[2], &format!("{}", -pos)]).unwrap();
    }
    w.flush().unwrap();
    let bad = tmp.path().join("bad");
    let out = run(&bad, &["verify", "--spec", &spec, "--strategy", tmp.path().join("flipped.csv").to_str().unwrap(), "--static", &flipped]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fails to superhedge"));
}

#[test]
fn discretise_constant_and_ramp() {
    let tmp = TempDir::new().unwrap();
    let flat = write(tmp.path(), "flat.csv", "t,s1\n0,1\n1,1\n");
    let out = run(&tmp.path().join("flat"), &["discretise", "--input", &flat, "-n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let errors = fs::read_to_string(tmp.path().join("flat/errors.csv")).unwrap();
    assert!(errors.contains("naive_vs_path,0,within_bound"));
    assert!(errors.contains("steps,1,ok"));

    let ramp = write(tmp.path(), "ramp.csv", "t,s1\n0,1\n1,1.25\n");
    let out = run(&tmp.path().join("ramp"), &["discretise", "--input", &ramp, "-n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let errors = fs::read_to_string(tmp.path().join("ramp/errors.csv")).unwrap();
    assert!(errors.contains("naive_vs_path,0.125,within_bound"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ramp/discretised.json")).unwrap()).unwrap();
    let times: Vec<&str> = json["jumps"].as_array().unwrap().iter().map(|j| j["t"].as_str().unwrap()).collect();
    assert_eq!(times, ["0/1", "1/2"]);
}

#[test]
fn marginals_invert_a_put_curve() {
    let tmp = TempDir::new().unwrap();
    // half the mass at 0.5 and half at 1.5
    let puts = write(tmp.path(), "puts.csv", "strike,price\n0.5,0\n1.5,0.5\n2,1\n");
    let out = run(tmp.path(), &["marginals", "--puts", &puts]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = fs::read_to_string(tmp.path().join("marginal.csv")).unwrap();
    assert_eq!(body, "value,prob\n0.5,0.5\n1.5,0.5\n");
}

#[test]
fn missing_spec_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["bounds", "--spec", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
