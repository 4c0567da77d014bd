use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ultratree")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = run(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn close(v: &Value, x: f64) -> bool {
    (v.as_f64().unwrap() - x).abs() <= 1e-12
}

#[test]
fn validate_reports_ultrametricity() {
    let v = json(&["validate", &fixture("e.json")]);
    assert_eq!(v["ultrametric"], true);
    assert_eq!(v["omega"], "w");
    let v = json(&["validate", &fixture("path.json")]);
    assert_eq!(v["ultrametric"], false);
}

#[test]
fn malformed_input_names_the_axiom() {
    let out = run(&["validate", &fixture("asymmetric.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetry"));
    let out = run(&["fill-info", &fixture("bent.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ultrametric"));
    let out = run(&["crt", &fixture("e.json"), "a", "a", "a", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crt_of_four_points() {
    let v = json(&["crt", &fixture("e.json"), "a", "b", "w", "w"]);
    assert_eq!(v["crt"], serde_json::json!([0.0, 0.5, 0.5]));
    assert_eq!(v["ultrametric_point"], true);
    let v = json(&["crt", &fixture("e.json"), "w", "c", "b", "a"]);
    assert!((v["cross_ratio"].as_str().unwrap().parse::<f64>().unwrap() - std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn fill_info_and_dendrogram() {
    let v = json(&["fill-info", &fixture("e.json"), "--cut", "-1"]);
    assert_eq!(v["dendrogram"], "((a:1,b:1):1,c:2):1;");
    assert_eq!(v["boundary_points"], 4);
    let out = run(&["fill-info", &fixture("e.json")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("dendrogram: "));
}

#[test]
fn distances_in_the_tree() {
    let v = json(&["dist", &fixture("e.json"), "a:2", "b:2"]);
    assert!(close(&v["distance"], 2.0));
    let v = json(&["dist", &fixture("e.json"), "a:0", "c:0"]);
    assert!(close(&v["distance"], 0.0));
    let v = json(&["ma1-dist", &fixture("e.json"), "a:0", "a:1"]);
    assert!(close(&v["ma1_distance"], 1.0));
    assert!(close(&v["tree_distance"], 1.0));
}

#[test]
fn boundary_metric_from_a_basepoint() {
    let v = json(&["boundary-metric", &fixture("e.json"), "a:0"]);
    assert_eq!(v["antipodal_diameter_1"], true);
    let m = v["metric"]["matrix"].as_array().unwrap();
    assert!(close(&m[0], (-1.0f64).exp()));
    assert!(m[1..].iter().all(|x| close(x, 1.0)));
}

#[test]
fn lift_of_a_swap() {
    let v = json(&[
        "lift",
        &fixture("e.json"),
        &fixture("e.json"),
        &fixture("swap.map"),
        &fixture("points.txt"),
    ]);
    let lifts = v["lifts"].as_array().unwrap();
    assert_eq!(lifts.len(), 3);
    assert_eq!(lifts[0]["image"]["anchor"], "b");
    assert!(close(&lifts[0]["image"]["t"], 2.0));
    assert_eq!(lifts[1]["image"]["anchor"], "a");
    assert!(close(&lifts[2]["image"]["t"], -1.0));
}

#[test]
fn roundtrip_certifies() {
    let v = json(&["roundtrip", &fixture("e.json"), "--pairs", "20", "--seed", "9"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["pairs_checked"], 20);
    assert_eq!(v["coherence_failures"], 0);
}

#[test]
fn fit_ultrametric_of_a_path() {
    let v = json(&["fit-ultrametric", &fixture("path.json")]);
    let m = v["space"]["matrix"].as_array().unwrap();
    assert!(m.iter().all(|x| close(x, 1.0)));
    let v = json(&["fit-ultrametric", &fixture("path.json"), "--encoding", "heights"]);
    assert_eq!(v["space"]["encoding"], "heights");
}

#[test]
fn suite_emits_a_passing_report() {
    let v = json(&["suite", "--seed", "7"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 7);
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 10);
    assert!(criteria.iter().all(|c| c["passed"] == true));
}
