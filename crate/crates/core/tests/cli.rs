use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pastel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pastel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = pastel(args, cwd);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path) {
    ok(
        &["sbm-gen", "--n", "60", "--c", "2", "--p", "0.2", "--q", "0.02", "--seed", "1", "--out", "g"],
        dir,
    );
}

#[test]
fn sbm_gen_writes_graph_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let g = dir.path().join("g");
    let labels = fs::read_to_string(g.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().next(), Some("node_id,class_id"));
    assert_eq!(labels.lines().count(), 61);
    let manifest = json(&g.join("manifest.json"));
    assert_eq!(manifest["command"], "sbm-gen");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 3);
}

#[test]
fn diagnose_reports_coefficients_and_curvature() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    ok(&["diagnose", "--graph", "g", "--per-class", "3", "--out", "d"], dir.path());
    let report = json(&dir.path().join("d/report.json"));
    let rc = report["rc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rc));
    let curv = report["per_edge_curvature"].as_array().unwrap();
    let edges = fs::read_to_string(dir.path().join("g/graph.edges")).unwrap();
    assert_eq!(curv.len(), edges.lines().count());
}

#[test]
fn diagnose_accepts_anchor_file() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    // Nodes 0 and 30 sit in different communities of the 60-node, 2-block graph.
    fs::write(dir.path().join("anchors.csv"), "node_id,class_id\n0,0\n30,1\n").unwrap();
    ok(&["diagnose", "--graph", "g", "--anchors", "anchors.csv", "--out", "d"], dir.path());
    let manifest = json(&dir.path().join("d/manifest.json"));
    assert_eq!(manifest["job"]["split"]["kind"], "anchors");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);
}

#[test]
fn train_writes_summary_records_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    fs::write(dir.path().join("run.cfg"), "# short run\nepochs = 6\nhidden = 8\n").unwrap();
    ok(
        &[
            "train", "--graph", "g", "--config", "run.cfg", "--per-class", "4", "--dump-structure", "s.edges",
            "--dump-gpr", "gpr.csv", "--out", "t",
        ],
        dir.path(),
    );
    let t = dir.path().join("t");
    let summary = json(&t.join("summary.json"));
    for key in ["wf1", "mf1", "rc_before", "rc_after", "sc_before", "sc_after"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(fs::read_to_string(t.join("records.jsonl")).unwrap().lines().count(), 6);
    assert_eq!(fs::read_to_string(t.join("gpr.csv")).unwrap().lines().count(), 60);
    assert!(!fs::read_to_string(t.join("s.edges")).unwrap().is_empty());
    let manifest = json(&t.join("manifest.json"));
    assert_eq!(manifest["job"]["config"]["epochs"], 6);
    assert_eq!(manifest["job"]["config"]["per_class"], 4);
}

#[test]
fn baseline_keeps_original_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["train", "--sbm", "n=60,c=2,p=0.2,q=0.02", "--baseline", "plain_gcn", "--epochs", "5", "--hidden", "8", "--out", "b"],
        dir.path(),
    );
    let s = json(&dir.path().join("b/summary.json"));
    assert_eq!(s["rc_before"], s["rc_after"]);
    assert_eq!(s["sc_before"], s["sc_after"]);
}

#[test]
fn study_csv_has_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "study", "--mode", "structures", "--sbm", "n=60,c=2,p=0.2,q=0.02", "--qs", "0.01,0.03,0.05", "--epochs",
            "4", "--hidden", "8", "--per-class", "3", "--out", "s",
        ],
        dir.path(),
    );
    let csv = fs::read_to_string(dir.path().join("s/study.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rc,sc,wf1,seed"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn errors_are_structured_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = pastel(&["train", "--sbm", "n=60,c=2,p=0.2", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "InvalidParams");

    let out = pastel(&["diagnose", "--graph", "missing", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "Io");

    let out = pastel(&["train", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rerun_refuses_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    ok(&["diagnose", "--graph", "g", "--per-class", "3", "--out", "d"], dir.path());
    let edges = dir.path().join("g/graph.edges");
    let mut text = fs::read_to_string(&edges).unwrap();
    text.push_str("# edited\n");
    fs::write(&edges, text).unwrap();
    let out = pastel(&["rerun", "--manifest", "d/manifest.json", "--out", "d2"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn pinned_fusion_matches_plain_gcn() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--sbm", "n=80,c=2,p=0.15,q=0.02,noise=2", "--seed", "1", "--epochs", "12", "--hidden", "8"];
    let mut gcn = vec!["train", "--baseline", "plain_gcn", "--out", "gcn"];
    gcn.extend(common);
    ok(&gcn, dir.path());
    let mut pinned = vec!["train", "--lambda1", "1", "--beta1", "0", "--beta2", "0", "--beta3", "0", "--out", "pinned"];
    pinned.extend(common);
    ok(&pinned, dir.path());
    let a = json(&dir.path().join("gcn/summary.json"));
    let b = json(&dir.path().join("pinned/summary.json"));
    assert_eq!(a["wf1"], b["wf1"]);
    assert_eq!(a["mf1"], b["mf1"]);
}
