//! End-to-end runs of the `treegrp` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn treegrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treegrp"))
        .args(args)
        .env_remove("TREEGRP_CAP_ELEMENTS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = treegrp(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn patterns_reports() {
    let r = json(&["patterns", "--family", "odometer:k=2,s=1", "--size", "2"]);
    assert_eq!(r["essential_patterns"], 4);
    assert_eq!(r["group"], true);
    assert_eq!(r["transitive"], true);
    assert_eq!(json(&["patterns", "--family", "grigorchuk", "--size", "2"])["group"], true);
    assert_eq!(json(&["patterns", "--family", "odometer:k=3,s=1", "--size", "2"])["essential_patterns"], 9);
    let listed = json(&["patterns", "--family", "gR", "--list"]);
    assert_eq!(listed["patterns"].as_array().unwrap().len(), 4);
}

#[test]
fn closure_reports() {
    let r = json(&["closure", "--family", "odometer:k=2,s=1", "--depth", "4"]);
    assert_eq!(r["verified"], true);
    assert_eq!(r["image_order"], 256);
    let r = json(&["closure", "--family", "odometer:k=2,s=1", "--depth", "1"]);
    assert_eq!(r["verified"], true);
    let r = json(&["closure", "--family", "grigorchuk", "--size", "4", "--depth", "4", "--contracting"]);
    assert_eq!(r["verified"], true);
    assert_eq!(r["nucleus_size"], 5);
}

#[test]
fn quotient_membership_and_group_checks() {
    let q = json(&["quotient", "--family", "gB", "--level", "4"]);
    assert_eq!(q["order"], 256);
    assert_eq!(q["d"], serde_json::json!([4, 4]));
    let m = json(&["membership", "--family", "gR", "--element", "t"]);
    assert_eq!(m["member"], true);
    let c = json(&["check-group", "--family", "trivial3"]);
    assert_eq!(c["group"], true);
    assert_eq!(c["viable"], 1);
    assert_eq!(json(&["nucleus", "--family", "odometer:k=2,s=0"])["nucleus_size"], 3);
}

#[test]
fn non_members_report_a_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.json");
    std::fs::write(&b, treegrp(&["export", "--family", "gB", "--object", "constraints"]).stdout).unwrap();
    // t has the forbidden root pattern t
    let m = json(&["membership", "--family", "gR", "--constraints", path(&b), "--element", "t"]);
    assert_eq!(m["member"], false);
    assert_eq!(m["violation"]["vertex"], "");
    assert_eq!(json(&["membership", "--family", "gB", "--element", "a*a_1"])["member"], true);
    assert!(m["violation"]["vertex"].is_string());
}

#[test]
fn output_is_deterministic() {
    let args = ["closure", "--family", "gB", "--depth", "3"];
    let a = treegrp(&args);
    let b = treegrp(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(treegrp(&["patterns", "--family", "nonsense"]).status.code(), Some(1));
    assert_eq!(treegrp(&["patterns"]).status.code(), Some(1));
    assert_eq!(treegrp(&["quotient", "--family", "gB"]).status.code(), Some(1));
    assert_eq!(treegrp(&["membership", "--family", "gR", "--element", "q"]).status.code(), Some(1));
    assert_eq!(treegrp(&["closure", "--family", "gB", "--cap-elements", "0"]).status.code(), Some(1));
    let capped = treegrp(&["quotient", "--family", "gB", "--level", "4", "--cap-elements", "10"]);
    assert_eq!(capped.status.code(), Some(2));
    let env_capped = Command::new(env!("CARGO_BIN_EXE_treegrp"))
        .args(["quotient", "--family", "gB", "--level", "4"])
        .env("TREEGRP_CAP_ELEMENTS", "10")
        .output()
        .unwrap();
    assert_eq!(env_capped.status.code(), Some(2));
}

#[test]
fn verification_failure_exits_with_three() {
    // <a> has order 2 at depth 2, while T_2 of G(R) has order 4
    let dir = tempfile::tempdir().unwrap();
    let constraints = dir.path().join("r.json");
    std::fs::write(&constraints, treegrp(&["export", "--family", "gR", "--object", "constraints"]).stdout).unwrap();
    let machine = dir.path().join("m.json");
    let mut spec: Value = serde_json::from_slice(&treegrp(&["export", "--family", "gB"]).stdout).unwrap();
    spec["generators"] = serde_json::json!({ "a": 1 });
    std::fs::write(&machine, spec.to_string()).unwrap();
    let out = treegrp(&["closure", "--group", path(&machine), "--constraints", path(&constraints), "--depth", "2"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verified"], false);
}

#[test]
fn presentation_round_trip_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let pres = dir.path().join("pres.json");
    let report = dir.path().join("report.json");
    let out = treegrp(&[
        "closure",
        "--family",
        "odometer:k=2,s=2",
        "--depth",
        "4",
        "--presentation-out",
        path(&pres),
        "--out",
        path(&report),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(saved["verified"], true);
    let v = json(&["verify", "--presentation", path(&pres), "--family", "odometer:k=2,s=2", "--depth", "5"]);
    assert_eq!(v["verified"], true);
}

#[test]
fn group_files_and_text_output() {
    let dir = tempfile::tempdir().unwrap();
    let machine = dir.path().join("grig.json");
    std::fs::write(&machine, treegrp(&["export", "--family", "grigorchuk"]).stdout).unwrap();
    let r = json(&["patterns", "--group", path(&machine), "--size", "3"]);
    assert_eq!(r["essential_patterns"], 128);
    assert_eq!(treegrp(&["patterns", "--group", path(&machine)]).status.code(), Some(1));
    let text = treegrp(&["check-group", "--family", "trivial3", "--format", "text"]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.lines().any(|l| l == "viable: 1"));
    let dot = String::from_utf8(treegrp(&["export", "--family", "gB", "--format", "dot"]).stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(treegrp(&["patterns", "--family", "gB", "--format", "dot"]).status.code(), Some(1));
}
