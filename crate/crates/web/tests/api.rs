use foldtorus_web::api;
use serde_json::Value;

fn parse(r: Result<String, String>) -> Value {
    serde_json::from_str(&r.expect("call succeeds")).expect("valid json")
}

#[test]
fn outline_has_one_fold_polygon_and_three_cones() {
    let v = parse(api::surface_outline());
    assert_eq!(v["polygons"].as_array().unwrap().len(), 1);
    assert!(!v["folds"].as_array().unwrap().is_empty());
    let mut labels: Vec<&str> = v["cones"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    labels.sort();
    assert_eq!(labels, ["AB", "C+", "C-"]);
}

#[test]
fn torus_trace_modes_agree() {
    let e = parse(api::torus_trace("1/2,1/3", "rt3,1", "50", "exact"));
    let f = parse(api::torus_trace("1/2,1/3", "rt3,1", "50", "float"));
    assert_eq!(e["termination"], "budget exhausted");
    assert_eq!(e["segments"].as_array().unwrap().len(), f["segments"].as_array().unwrap().len());
    assert!((e["arclength"].as_f64().unwrap() - 50.0).abs() < 1e-12);
    let (se, sf) = (e["segments"].as_array().unwrap(), f["segments"].as_array().unwrap());
    for (a, b) in se.iter().zip(sf) {
        for k in 0..4 {
            assert!((a[k].as_f64().unwrap() - b[k].as_f64().unwrap()).abs() < 1e-6);
        }
    }
}

#[test]
fn cover_trace_deviation_records_increase() {
    let v = parse(api::cover_trace("", "", "rt3,1", "100", "exact"));
    let recs = v["records"].as_array().unwrap();
    assert!(recs.len() > 2);
    let d: Vec<f64> = recs.iter().map(|r| r[1].as_f64().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] < w[1]));
    assert!(v["max_deviation"].as_f64().unwrap() > 2.0);
}

#[test]
fn cover_trace_can_stop_at_a_slit_center() {
    let v = parse(api::cover_trace("1/2,1/2", "", "-1,1", "10", "exact"));
    assert_eq!(v["termination"], "hit slit center (0, 1)-");
}

#[test]
fn billiard_modes_agree() {
    let e = parse(api::billiard("1/4", "axis", "1/7*rt3,1/3", "1,1", "50", "exact"));
    let f = parse(api::billiard("1/4", "axis", "1/7*rt3,1/3", "1,1", "50", "float"));
    assert_eq!(e["bounces"], f["bounces"]);
    assert_eq!(e["distinct_directions"], f["distinct_directions"]);
    assert_eq!(e["distinct_directions"], 4);
    assert_eq!(e["orientation"], "axis");
}

#[test]
fn bad_input_is_reported() {
    assert!(api::torus_trace("x", "1,1", "1", "exact").is_err());
    assert!(api::torus_trace("1/2,1/3", "1,1", "1e9", "exact").is_err());
    assert!(api::torus_trace("1/2,1/3", "1,1", "5", "fast").is_err());
    assert!(api::billiard("3/4", "axis", "1/7*rt3,1/3", "1,1", "5", "exact").is_err());
    assert!(api::cover_trace("1/2,0", "?", "1,1", "5", "exact").is_err());
}
