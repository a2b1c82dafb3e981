// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

use std::path::Path;
use std::process::{Command, Output};

fn pass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pass")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pass(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_build_query_bench() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let syn = dir.path().join("syn.json");
    let json = dir.path().join("report.json");
    let table = dir.path().join("report.csv");
    ok(&["synth", "--kind", "mixed", "--rows", "3000", "--d", "2", "--seed", "4", "--out", s(&csv)]);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("x0,x1,value\n"));

    let base = ["--input", s(&csv), "--pred-cols", "x0,x1", "--agg-col", "value"];
    let mut build = vec!["build"];
    build.extend(base);
    build.extend(["--method", "kd-greedy", "--k", "16", "--samples", "300", "--out", s(&syn)]);
    ok(&build);

    let everything = ok(&["query", "--synopsis", s(&syn), "--kind", "count"]);
    let v: serde_json::Value = serde_json::from_str(&everything).unwrap();
    assert_eq!(v["value"], 3000.0);
    assert_eq!(v["ci"], 0.0);

    let window = ok(&["query", "--synopsis", s(&syn), "--kind", "avg", "--range", "0:100:700", "--range", "1:-inf:500"]);
    let v: serde_json::Value = serde_json::from_str(&window).unwrap();
    for key in ["value", "ci", "lb", "ub", "partial_leaves", "skip_rate"] {
        assert!(v.get(key).is_some(), "missing {key} in {window}");
    }
    assert!(v["lb"].as_f64().unwrap() <= v["ub"].as_f64().unwrap());

    let mut bench = vec!["bench"];
    bench.extend(base);
    bench.extend(["--k", "16", "--samples", "300", "--queries", "50", "--kinds", "sum,avg", "--threads", "2"]);
    let report = format!("{},{}", s(&json), s(&table));
    bench.extend(["--report", &report]);
    let stdout = ok(&bench);
    assert_eq!(stdout.lines().count(), 3, "{stdout}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 150);
    let rows = std::fs::read_to_string(&table).unwrap();
    assert_eq!(rows.lines().count(), 151);
}

#[test]
fn reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "x,value\n1,2\n3,oops\n").unwrap();
    let out_path = dir.path().join("syn.json");
    let out = pass(&["build", "--input", s(&csv), "--pred-cols", "x", "--agg-col", "value", "--k", "1", "--out", s(&out_path)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");
    assert!(!out_path.exists());

    let out = pass(&["build", "--input", s(&csv), "--pred-cols", "y", "--agg-col", "value", "--out", s(&out_path)]);
    assert!(!out.status.success());

    let out = pass(&["query", "--synopsis", s(&dir.path().join("missing.json")), "--kind", "sum"]);
    assert!(!out.status.success());
}
