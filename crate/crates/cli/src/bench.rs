// SPDX-License-Identifier: Apache-2.0

//! Suite runner: one design per grid row, three scheme rows per design.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use sta_core::diff::{finite_diff_check_at, run_gradient, GradConfig};
use sta_core::netlist::generate_design;
use sta_core::par::ExecMode;
use sta_core::sta::{tns, Analysis, StaConfig};
use sta_core::warp::{compare_schemes, Scheme};

use crate::commands::{fusion_summary, sample_coordinates, SchemeRow};
use crate::manifest::{design_hash, write_csv, write_json, ManifestStamp, RunManifest};
use crate::suite::{BenchmarkSuite, SuiteRow};

/// One row of `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub label: String,
    pub row: usize,
    pub seed: u64,
    pub cells: usize,
    pub nets: usize,
    pub pins: usize,
    pub levels: usize,
    pub design_hash: String,
    pub scheme: String,
    pub total_cycles: u64,
    pub work_cycles: u64,
    pub overhead_cycles: u64,
    pub launch_cycles: u64,
    pub warps_launched: u64,
    pub lane_utilization: f64,
    pub issue_efficiency: f64,
    pub rescheduling_steps: u64,
    pub max_rel_error: f64,
    pub exact: bool,
    pub value_check: bool,
}

/// One row of `designs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub label: String,
    pub row: usize,
    pub seed: u64,
    pub cells: usize,
    pub nets: usize,
    pub pins: usize,
    pub levels: usize,
    pub design_hash: String,
    pub hard_tns: f64,
    pub smooth_loss: f64,
    pub grad_checked: usize,
    pub grad_max_rel_error: f64,
    pub grad_passed: bool,
    pub sequential_makespan: f64,
    pub fused_makespan: f64,
    pub overlap_fraction: f64,
    pub sequential_overhead: f64,
    pub fused_overhead: f64,
    pub fused_equivalent: bool,
    pub values_passed: bool,
    /// `ok` or the error that stopped the row.
    pub status: String,
}

pub const RUN_COLUMNS: [&str; 20] = [
    "label",
    "row",
    "seed",
    "cells",
    "nets",
    "pins",
    "levels",
    "design_hash",
    "scheme",
    "total_cycles",
    "work_cycles",
    "overhead_cycles",
    "launch_cycles",
    "warps_launched",
    "lane_utilization",
    "issue_efficiency",
    "rescheduling_steps",
    "max_rel_error",
    "exact",
    "value_check",
];

pub const DESIGN_COLUMNS: [&str; 21] = [
    "label",
    "row",
    "seed",
    "cells",
    "nets",
    "pins",
    "levels",
    "design_hash",
    "hard_tns",
    "smooth_loss",
    "grad_checked",
    "grad_max_rel_error",
    "grad_passed",
    "sequential_makespan",
    "fused_makespan",
    "overlap_fraction",
    "sequential_overhead",
    "fused_overhead",
    "fused_equivalent",
    "values_passed",
    "status",
];

impl From<SchemeRow> for RunRow {
    fn from(s: SchemeRow) -> Self {
        Self {
            label: String::new(),
            row: 0,
            seed: 0,
            cells: 0,
            nets: 0,
            pins: 0,
            levels: 0,
            design_hash: String::new(),
            scheme: s.scheme,
            total_cycles: s.total_cycles,
            work_cycles: s.work_cycles,
            overhead_cycles: s.overhead_cycles,
            launch_cycles: s.launch_cycles,
            warps_launched: s.warps_launched,
            lane_utilization: s.lane_utilization,
            issue_efficiency: s.issue_efficiency,
            rescheduling_steps: s.rescheduling_steps,
            max_rel_error: s.max_rel_error,
            exact: s.exact,
            value_check: s.value_check,
        }
    }
}

impl DesignRow {
    fn failed(r: &SuiteRow, status: String) -> Self {
        Self {
            label: r.label.clone(),
            row: r.row,
            seed: r.generator.seed,
            cells: 0,
            nets: 0,
            pins: 0,
            levels: 0,
            design_hash: String::new(),
            hard_tns: f64::NAN,
            smooth_loss: f64::NAN,
            grad_checked: 0,
            grad_max_rel_error: f64::NAN,
            grad_passed: false,
            sequential_makespan: f64::NAN,
            fused_makespan: f64::NAN,
            overlap_fraction: f64::NAN,
            sequential_overhead: f64::NAN,
            fused_overhead: f64::NAN,
            fused_equivalent: false,
            values_passed: false,
            status,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "ok" && self.grad_passed && self.fused_equivalent && self.values_passed
    }
}

fn run_row(suite: &BenchmarkSuite, r: &SuiteRow) -> anyhow::Result<(DesignRow, Vec<RunRow>)> {
    let d = generate_design(&r.generator)?;
    let analysis = Analysis::new(&d)?;
    let hash = design_hash(&d);
    let comparison = compare_schemes(&analysis, &suite.geometry, &suite.cost_model, ExecMode::default())?;
    let runs: Vec<RunRow> = comparison
        .runs
        .iter()
        .map(|run| RunRow {
            label: r.label.clone(),
            row: r.row,
            seed: r.generator.seed,
            cells: d.cells.len(),
            nets: d.nets.len(),
            pins: d.pins.len(),
            levels: analysis.num_levels(),
            design_hash: hash.clone(),
            ..RunRow::from(SchemeRow::from(run))
        })
        .collect();

    let grad = GradConfig {
        gamma: suite.gradient.gamma_fraction * d.clock_period,
        ..GradConfig::for_design(&d)
    };
    let state = analysis.run(&StaConfig::default())?;
    let g = run_gradient(&analysis, &state, &grad)?;
    let sample = sample_coordinates(&d, &g, suite.gradient.check_sample);
    let fd = finite_diff_check_at(
        &analysis,
        &state,
        &grad,
        suite.gradient.epsilon_fraction * d.clock_period,
        &sample,
    )?;
    let (fusion, _) = fusion_summary(
        &analysis,
        &state,
        &g,
        &grad,
        suite.fusion.granularity,
        suite.fusion.grad_scale,
    )?;
    let row = DesignRow {
        label: r.label.clone(),
        row: r.row,
        seed: r.generator.seed,
        cells: d.cells.len(),
        nets: d.nets.len(),
        pins: d.pins.len(),
        levels: analysis.num_levels(),
        design_hash: hash,
        hard_tns: tns(&d, &state).total,
        smooth_loss: g.loss,
        grad_checked: fd.checked,
        grad_max_rel_error: fd.max_rel_error,
        grad_passed: fd.passed(),
        sequential_makespan: fusion.sequential_makespan,
        fused_makespan: fusion.fused_makespan,
        overlap_fraction: fusion.overlap_fraction,
        sequential_overhead: fusion.sequential_overhead,
        fused_overhead: fusion.fused_overhead,
        fused_equivalent: fusion.equivalent && fusion.fused_makespan <= fusion.sequential_makespan,
        values_passed: runs.iter().all(|x| x.value_check),
        status: "ok".into(),
    };
    Ok((row, runs))
}

fn run_rows(suite: &BenchmarkSuite, rows: &[SuiteRow], parallel: usize) -> Vec<(DesignRow, Vec<RunRow>)> {
    let one = |r: &SuiteRow| run_row(suite, r).unwrap_or_else(|e| (DesignRow::failed(r, format!("error: {e:#}")), Vec::new()));
    #[cfg(feature = "parallel")]
    if parallel > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .expect("thread pool builds");
        return pool.install(|| rows.par_iter().map(one).collect());
    }
    #[cfg(not(feature = "parallel"))]
    if parallel > 1 {
        eprintln!("warning: built without the parallel feature; running rows in sequence");
    }
    rows.iter().map(one).collect()
}

fn geomean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeAggregate {
    /// Geometric mean of total cycles over the pin-based total of the same design.
    pub cycles_vs_pin_based: Option<f64>,
    pub mean_lane_utilization: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub manifest: ManifestStamp,
    pub suite: String,
    pub rows: usize,
    pub failed_rows: usize,
    /// Keyed by scheme name.
    pub schemes: BTreeMap<String, SchemeAggregate>,
    /// Keyed by entry label, then scheme name.
    pub by_label: BTreeMap<String, BTreeMap<String, SchemeAggregate>>,
    pub mean_overlap_fraction: Option<f64>,
    pub worst_gradient_error: Option<f64>,
    pub passed: bool,
}

fn aggregate(runs: &[&RunRow]) -> BTreeMap<String, SchemeAggregate> {
    let mut out = BTreeMap::new();
    for scheme in Scheme::ALL {
        let name = scheme.name();
        let mut ratios = Vec::new();
        let mut utils = Vec::new();
        for r in runs.iter().filter(|r| r.scheme == name) {
            utils.push(r.lane_utilization);
            let pin = runs
                .iter()
                .find(|p| p.row == r.row && p.scheme == Scheme::PinBased.name());
            if let Some(p) = pin.filter(|p| p.total_cycles > 0) {
                ratios.push(r.total_cycles as f64 / p.total_cycles as f64);
            }
        }
        out.insert(
            name.to_string(),
            SchemeAggregate {
                cycles_vs_pin_based: geomean(&ratios),
                mean_lane_utilization: (!utils.is_empty()).then(|| utils.iter().sum::<f64>() / utils.len() as f64),
            },
        );
    }
    out
}

/// Runs `suite_path` and writes `runs.csv`, `designs.csv`, `summary.json`
/// and `manifest.json` into `out_dir`.
pub fn cmd_bench(suite_path: &Path, out_dir: &Path, parallel: usize, out: &mut dyn Write) -> anyhow::Result<bool> {
    let started = Instant::now();
    let text = std::fs::read_to_string(suite_path).with_context(|| format!("reading {}", suite_path.display()))?;
    let suite = BenchmarkSuite::parse(&text).with_context(|| format!("parsing {}", suite_path.display()))?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let rows = suite.rows();
    let results = run_rows(&suite, &rows, parallel);
    let designs: Vec<DesignRow> = results.iter().map(|(d, _)| d.clone()).collect();
    let runs: Vec<RunRow> = results.into_iter().flat_map(|(_, r)| r).collect();
    for d in designs.iter().filter(|d| !d.passed()) {
        eprintln!("row {} ({}): check failed, status {}", d.row, d.label, d.status);
    }

    let mut m = RunManifest::new("bench", serde_json::to_value(&suite)?, None, Some(suite.seed));
    m.outputs = ["runs.csv", "designs.csv", "summary.json"].map(String::from).to_vec();
    let all: Vec<&RunRow> = runs.iter().collect();
    let mut by_label = BTreeMap::new();
    for e in &suite.entries {
        let subset: Vec<&RunRow> = runs.iter().filter(|r| r.label == e.label).collect();
        by_label.insert(e.label.clone(), aggregate(&subset));
    }
    let ok: Vec<&DesignRow> = designs.iter().filter(|d| d.status == "ok").collect();
    let failed_rows = designs.iter().filter(|d| !d.passed()).count();
    let summary = SuiteSummary {
        manifest: m.stamp(),
        suite: suite.name.clone(),
        rows: designs.len(),
        failed_rows,
        schemes: aggregate(&all),
        by_label,
        mean_overlap_fraction: (!ok.is_empty())
            .then(|| ok.iter().map(|d| d.overlap_fraction).sum::<f64>() / ok.len() as f64),
        worst_gradient_error: ok.iter().map(|d| d.grad_max_rel_error).reduce(f64::max),
        passed: failed_rows == 0,
    };
    write_csv(&out_dir.join("runs.csv"), &runs)?;
    write_csv(&out_dir.join("designs.csv"), &designs)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    serde_json::to_writer_pretty(&mut *out, &summary)?;
    writeln!(out)?;
    m.wall_seconds = started.elapsed().as_secs_f64();
    write_json(&out_dir.join("manifest.json"), &m)?;
    Ok(summary.passed)
}
