use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldtorus")).args(args).output().expect("spawn foldtorus")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let o = run(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid json")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("foldtorus-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn point(v: &Value) -> (f64, f64) {
    let p = v.as_array().unwrap();
    (p[0].as_f64().unwrap(), p[1].as_f64().unwrap())
}

#[test]
fn surface_info_reports_census() {
    let o = run(&["surface-info"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next().unwrap(), "pi, pi, 4pi; area 3");
    let v = json(&["surface-info"]);
    assert_eq!(v["census"], serde_json::json!(["pi", "pi", "4pi"]));
}

#[test]
fn verify_autos_succeeds() {
    let o = run(&["verify-autos"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn contraction_table_prints_ratio() {
    let o = run(&["lemma4", "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("168/1+-97/1*rt3"));
    assert!(text.trim_end().ends_with("ratio 97/1+-56/1*rt3"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["trace", "--start", "1/2,1/3", "--dir", "x", "--budget", "5"]).status.code(), Some(2));
    let o = run(&["billiard", "--arm", "3/4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn decimal_budgets_are_accepted() {
    let v = json(&["trace", "--start", "1/2,1/3", "--dir", "rt3,1", "--budget", "2.5e1"]);
    assert_eq!(v["arclength_exact"], "25/1+0/1*rt3");
}

#[test]
fn csv_output_is_deterministic() {
    let (a, b) = (tmp("a.csv"), tmp("b.csv"));
    for p in [&a, &b] {
        let o = run(&["trace", "--start", "1/2,1/3", "--dir", "rt3,1", "--budget", "40", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().starts_with("seg_index,poly,x0,y0,x1,y1,x0e,y0e,x1e,y1e\n"));
}

#[test]
fn float_mode_tracks_exact_mode() {
    let args = ["trace", "--start", "1/2,1/3", "--dir", "rt3,1", "--budget", "20"];
    let e = json(&args);
    let mut f_args = vec!["--mode", "float"];
    f_args.extend_from_slice(&args);
    let f = json(&f_args);
    assert_eq!(e["segments"], f["segments"]);
    assert_eq!(e["end"]["poly"], f["end"]["poly"]);
    let (pe, pf) = (point(&e["end"]["point"]), point(&f["end"]["point"]));
    assert!((pe.0 - pf.0).abs() < 1e-6 && (pe.1 - pf.1).abs() < 1e-6);

    let b = ["billiard", "--budget", "50"];
    let e = json(&b);
    let f = json(&["--mode", "float", "billiard", "--budget", "50"]);
    assert_eq!(e["bounces"], f["bounces"]);
    let (pe, pf) = (point(&e["end"]), point(&f["end"]));
    assert!((pe.0 - pf.0).abs() < 1e-6 && (pe.1 - pf.1).abs() < 1e-6);
}

#[test]
fn cover_trace_spends_its_budget() {
    let v = json(&["trace", "--cover", "--start", "0,0", "--shore", "+", "--dir", "rt3,1", "--budget", "4"]);
    assert_eq!(v["termination"], "BudgetExhausted");
    assert_eq!(v["arclength"], 4.0);
    assert_eq!(v["direction_units"], false);
}
