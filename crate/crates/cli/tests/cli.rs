// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sta_cli::bench::{DESIGN_COLUMNS, RUN_COLUMNS};
use sta_cli::commands::COMPARE_COLUMNS;

fn stasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stasim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Generates a design and returns its path.
fn gen(dir: &Path, name: &str, config: &str) -> PathBuf {
    let cfg = write_config(dir, &format!("{name}.cfg.json"), config);
    let out = dir.join(format!("{name}.json"));
    let o = stasim(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const UNIFORM: &str =
    r#"{"num_cells": 50, "fanout_distribution": {"kind": "uniform", "lo": 1, "hi": 4}, "depth_target": 6, "lut_grid_size": 5, "seed": 3}"#;
const SKEWED: &str = r#"{"num_cells": 2000, "fanout_distribution": {"kind": "power_law", "alpha": 2.0, "max": 512}, "depth_target": 12, "lut_grid_size": 5, "seed": 5}"#;

#[test]
fn gen_counts_follow_config_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let (cells, k, depth) = (45usize, 3usize, 7usize);
    let cfg = format!(
        r#"{{"num_cells": {cells}, "fanout_distribution": {{"kind": "fixed", "k": {k}}}, "depth_target": {depth}, "lut_grid_size": 4, "seed": 1}}"#
    );
    let cfg_path = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("d.json");
    let o = stasim(&["gen", "--config", s(&cfg_path), "--out", s(&out)]);
    assert!(o.status.success());
    let v = json(&o);
    let summary = &v["summary"];
    // Outputs, one input per net member, and one primary input per first-layer cell.
    let pins = cells + cells * k + cells.div_ceil(depth);
    assert_eq!(summary["cells"], cells);
    assert_eq!(summary["nets"], cells);
    assert_eq!(summary["pins"], pins);
    assert_eq!(summary["levels"], depth);
    assert_eq!(v["manifest"]["design_hash"], summary["design_hash"]);
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(gen(dir.path(), "a", UNIFORM)).unwrap();
    let b = std::fs::read(gen(dir.path(), "b", UNIFORM)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_config_fails_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"num_cells": "many"}"#);
    let o = stasim(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("d.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[derive(serde::Deserialize)]
struct Record {
    pin: String,
    condition: String,
    load: f64,
    delay: f64,
    impulse: f64,
    slew: f64,
    arrival: f64,
    required: f64,
    slack: f64,
}

fn records(path: &Path) -> Vec<Record> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn close(a: f64, b: f64, floor: f64) -> bool {
    (a == b) || (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(floor)
}

#[test]
fn reference_and_pin_based_reports_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen(dir.path(), "d", SKEWED);
    let mut files = Vec::new();
    for scheme in ["reference", "pin-based"] {
        let report = dir.path().join(format!("{scheme}.json"));
        let o = stasim(&["sta", "--design", s(&d), "--scheme", scheme, "--report", s(&report)]);
        assert!(o.status.success());
        files.push(report.with_extension("csv"));
    }
    let (a, b) = (records(&files[0]), records(&files[1]));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.pin, &x.condition), (&y.pin, &y.condition));
        for (u, v) in [
            (x.load, y.load),
            (x.delay, y.delay),
            (x.impulse, y.impulse),
            (x.slew, y.slew),
            (x.arrival, y.arrival),
            (x.required, y.required),
            (x.slack, y.slack),
        ] {
            assert!(close(u, v, 1e-18) || (u.is_nan() && v.is_nan()), "{} {}: {u} vs {v}", x.pin, x.condition);
        }
    }
}

#[test]
fn relaxed_clock_has_zero_tns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = UNIFORM.replace(r#""seed": 3"#, r#""seed": 3, "clock_period": 1.0"#);
    let d = gen(dir.path(), "d", &cfg);
    let o = stasim(&["sta", "--design", s(&d)]);
    assert!(o.status.success());
    assert_eq!(json(&o)["summary"]["tns"], 0.0);
}

#[test]
fn cte_utilization_beats_net_based_on_skewed_fanout() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen(dir.path(), "d", SKEWED);
    let util = |scheme: &str| json(&stasim(&["sta", "--design", s(&d), "--scheme", scheme]))["summary"]["utilization"]
        .as_f64()
        .unwrap();
    assert!(util("cte") > util("net-based"));
}

fn compare_rows(v: &Value) -> Vec<(String, u64, u64)> {
    v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["scheme"].as_str().unwrap().to_string(),
                r["total_cycles"].as_u64().unwrap(),
                r["work_cycles"].as_u64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn compare_balanced_and_skewed() {
    let dir = tempfile::tempdir().unwrap();
    // Eight members per net fill one pin-based warp exactly and give every
    // net-based lane the same trip count.
    let balanced = gen(
        dir.path(),
        "bal",
        r#"{"num_cells": 512, "fanout_distribution": {"kind": "fixed", "k": 8}, "depth_target": 1, "lut_grid_size": 4, "seed": 2}"#,
    );
    let out = dir.path().join("cmp");
    let o = stasim(&["compare", "--design", s(&balanced), "--out", s(&out)]);
    assert!(o.status.success());
    let rows = compare_rows(&json(&o));
    assert_eq!(rows.len(), 3);
    let work: Vec<u64> = rows.iter().map(|r| r.2).collect();
    assert!(work.iter().all(|&w| w == work[0]), "{rows:?}");
    let header = csv::Reader::from_path(out.join("compare.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), COMPARE_COLUMNS);

    let skewed = gen(dir.path(), "skew", SKEWED);
    let o = stasim(&["compare", "--design", s(&skewed)]);
    assert!(o.status.success());
    let rows = compare_rows(&json(&o));
    let cycles = |name: &str| rows.iter().find(|r| r.0 == name).unwrap().1;
    assert!(cycles("pin-based") < cycles("cte") && cycles("cte") < cycles("net-based"), "{rows:?}");
}

#[test]
fn tampered_reduction_fails_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen(dir.path(), "d", SKEWED);
    let o = stasim(&["compare", "--design", s(&d), "--inject-fault-lane", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn grad_check_and_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen(dir.path(), "d", UNIFORM);
    let out = dir.path().join("g");
    let o = stasim(&["grad", "--design", s(&d), "--check", "--strict", "--fuse", "--granularity", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["coordinates"].as_u64().unwrap() > 0);
    assert!(v["check"]["max_rel_error"].as_f64().unwrap() < 1e-4);
    let f = &v["fusion"];
    assert!(f["fused_makespan"].as_f64().unwrap() <= f["sequential_makespan"].as_f64().unwrap());
    assert_eq!(f["equivalent"], true);
    let header = |f: &str| csv::Reader::from_path(out.join(f)).unwrap().headers().unwrap().clone();
    assert_eq!(header("gradients.csv").iter().collect::<Vec<_>>(), ["kind", "index", "edge", "delay", "gradient"]);
    assert_eq!(header("trace.csv").iter().collect::<Vec<_>>(), ["id", "stream", "kind", "level", "start", "finish"]);
}

#[test]
fn nonpositive_gamma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = gen(dir.path(), "d", UNIFORM);
    for g in ["0", "-1e-12", "nan"] {
        let o = stasim(&["grad", "--design", s(&d), &format!("--gamma={g}")]);
        assert_eq!(o.status.code(), Some(2), "gamma {g}");
        assert!(o.stdout.is_empty());
    }
}

const SMALL_SUITE: &str = r#"{
  "name": "small",
  "seed": 9,
  "entries": [
    {"label": "fixed", "num_cells": 150, "fanout_distribution": {"kind": "fixed", "k": 3}, "depth_target": 6, "repetitions": 5},
    {"label": "uniform", "num_cells": 150, "fanout_distribution": {"kind": "uniform", "lo": 1, "hi": 8}, "depth_target": 6, "repetitions": 5},
    {"label": "skewed", "num_cells": 400, "fanout_distribution": {"kind": "power_law", "alpha": 2.0, "max": 256}, "depth_target": 8, "repetitions": 5}
  ],
  "gradient": {"check_sample": 16}
}"#;

#[test]
fn bench_rows_aggregates_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write_config(dir.path(), "suite.json", SMALL_SUITE);
    let run = |name: &str, parallel: &str| {
        let out = dir.path().join(name);
        let o = stasim(&["bench", "--suite", s(&suite), "--out", s(&out), "--parallel", parallel]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (out, json(&o))
    };
    let (a, summary) = run("a", "1");
    let (b, _) = run("b", "1");
    let (c, _) = run("c", "3");
    for f in ["runs.csv", "designs.csv", "summary.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
    let mut reader = csv::Reader::from_path(a.join("runs.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), RUN_COLUMNS);
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().unwrap();
    for scheme in ["net-based", "pin-based", "cte"] {
        assert_eq!(rows.iter().filter(|r| &r[8] == scheme).count(), 15);
    }
    let designs = csv::Reader::from_path(a.join("designs.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(designs.iter().collect::<Vec<_>>(), DESIGN_COLUMNS);
    let ratio = summary["by_label"]["skewed"]["net-based"]["cycles_vs_pin_based"].as_f64().unwrap();
    assert!(ratio > 1.0, "{ratio}");
    assert_eq!(summary["rows"], 15);
    assert_eq!(summary["passed"], true);
    assert!(a.join("manifest.json").exists());
}

#[test]
fn bad_suite_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write_config(dir.path(), "suite.json", &SMALL_SUITE.replace(r#""repetitions": 5}"#, r#""repetitions": 0}"#));
    let o = stasim(&["bench", "--suite", s(&suite), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}
