//! End-to-end runs of the `lexls` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lexls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexls")).args(args).output().expect("binary runs")
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

/// Every numeric CSV cell appears among the numbers of the JSON trace.
fn assert_csv_in_json(csv: &str, json: &str) {
    let mut all = Vec::new();
    numbers(&serde_json::from_str(json).unwrap(), &mut all);
    for line in csv.lines().skip(1) {
        for cell in line.split(',').skip(1).filter(|c| !c.is_empty()) {
            let v: f64 = cell.parse().unwrap_or_else(|_| panic!("non-numeric cell {cell}"));
            assert!(all.contains(&v), "{cell} missing from JSON");
        }
    }
}

fn out_path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn testfuncs_table_has_nine_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "tf.csv");
    let o = lexls(&["run", "testfuncs", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("problem,level,slack_norm,outer_iters,inner_iters,time_ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], "testfuncs");
        assert_eq!(r[1], (i + 1).to_string());
        assert_eq!(r[5], "");
    }
    let json = std::fs::read_to_string(format!("{out}.trace.json")).unwrap();
    assert_csv_in_json(&csv, &json);
}

#[test]
fn timing_values_are_in_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "tb.csv");
    let o = lexls(&["run", "--problem", "turnback-bench", "--T", "5..10", "--nua", "0", "--timing", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("problem,horizon,n_ua,rank,nnz_z,nnz_ztz,density,max_window,time_ms\n"));
    assert_eq!(csv.lines().count(), 3);
    assert_csv_in_json(&csv, &std::fs::read_to_string(format!("{out}.trace.json")).unwrap());
}

#[test]
fn turnback_bench_nnz_increases_with_horizon() {
    let o = lexls(&["run", "turnback-bench", "--T", "5..25", "--nua", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let nnz: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(nnz.len(), 5);
    assert!(nnz.windows(2).all(|w| w[1] > w[0]), "{nnz:?}");
}

#[test]
fn json_format_writes_one_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "r.json");
    let o = lexls(&["run", "random-hlsp", "--seed", "5", "--format", "json", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["problem"], "random-hlsp");
    assert_eq!(v["seed"], 5);
    assert_eq!(v["levels"].as_array().unwrap().len(), 3);
    assert!(!Path::new(&format!("{out}.trace.json")).exists());
}

#[test]
fn unknown_key_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "max_outer = 10\nadmm.rhoo = 3\n").unwrap();
    let out = out_path(dir.path(), "x.csv");
    let o = lexls(&["run", "testfuncs", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("admm.rhoo"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn malformed_and_invalid_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    for text in ["chi\n", "chi = fast\n", "beta = 2\n"] {
        std::fs::write(&cfg, text).unwrap();
        let o = lexls(&["run", "testfuncs", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(o.stdout.is_empty());
    }
    assert_eq!(lexls(&["run", "testfuncs", "--T", "9..1"]).status.code(), Some(1));
    assert_eq!(lexls(&["run", "testfuncs", "--threads", "0"]).status.code(), Some(1));
}

#[test]
fn exhausted_budget_exits_two_with_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "short.csv");
    let o = lexls(&["run", "testfuncs", "--max-outer", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 10);
}

#[test]
fn config_file_overrides_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ok.cfg");
    std::fs::write(&cfg, "# smaller instance\nrandom.n = 8\nrandom.levels = 2\n").unwrap();
    let o = lexls(&["run", "random-hlsp", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}
