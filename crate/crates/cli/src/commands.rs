// SPDX-License-Identifier: Apache-2.0

//! Command implementations. Each writes its report payload to `out` and
//! returns whether every requested correctness check passed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use sta_core::diff::{
    finite_diff_check_at, late_pair, run_gradient, Coordinate, FdReport, GradConfig, GradientState, LossKind,
};
use sta_core::fusion::{
    build_kernel_graph, execute_fused, schedule_fused, schedule_sequential, FusionConfig, KernelCosts, TraceRecord,
};
use sta_core::netlist::{generate_design, parse_design, serialize_design, Design, GeneratorConfig};
use sta_core::par::ExecMode;
use sta_core::sta::{tns, Analysis, StaConfig, TimingReport, TimingState};
use sta_core::warp::{
    assign, compare_schemes_with, execute_scheduled, CostModel, ExecOptions, Fault, Scheme, SchemeRun, WarpGeometry,
};

use crate::manifest::{design_hash, write_csv, write_json, ManifestStamp, RunManifest};

pub fn load_design(path: &Path) -> anyhow::Result<Design> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_design(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn finish_manifest(mut m: RunManifest, started: Instant, path: Option<&Path>) -> anyhow::Result<()> {
    m.wall_seconds = started.elapsed().as_secs_f64();
    if let Some(p) = path {
        write_json(p, &m)?;
    }
    Ok(())
}

/// `<path>` with its extension replaced.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

// ---------------------------------------------------------------- gen

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub cells: usize,
    pub nets: usize,
    pub pins: usize,
    pub endpoints: usize,
    pub levels: usize,
    pub design_hash: String,
}

impl DesignSummary {
    pub fn new(design: &Design, levels: usize) -> Self {
        Self {
            cells: design.cells.len(),
            nets: design.nets.len(),
            pins: design.pins.len(),
            endpoints: design.endpoints().count(),
            levels,
            design_hash: design_hash(design),
        }
    }
}

#[derive(Serialize)]
struct GenReport {
    manifest: ManifestStamp,
    summary: DesignSummary,
}

pub fn cmd_gen(config: &Path, out_path: &Path, out: &mut dyn Write) -> anyhow::Result<bool> {
    let started = Instant::now();
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: GeneratorConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let design = generate_design(&cfg)?;
    let analysis = Analysis::new(&design)?;
    std::fs::write(out_path, serialize_design(&design)).with_context(|| format!("writing {}", out_path.display()))?;
    let summary = DesignSummary::new(&design, analysis.num_levels());
    let mut m = RunManifest::new(
        "gen",
        serde_json::to_value(&cfg)?,
        Some(summary.design_hash.clone()),
        Some(cfg.seed),
    );
    m.outputs.push(out_path.display().to_string());
    emit(
        out,
        &GenReport {
            manifest: m.stamp(),
            summary,
        },
    )?;
    finish_manifest(m, started, Some(&sibling(out_path, "manifest.json")))?;
    Ok(true)
}

// ---------------------------------------------------------------- sta

/// `reference` or one of the scheduled schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Reference,
    Scheduled(Scheme),
}

impl Engine {
    pub fn parse(name: &str) -> anyhow::Result<Engine> {
        if name == "reference" {
            return Ok(Engine::Reference);
        }
        match Scheme::from_name(name) {
            Some(s) => Ok(Engine::Scheduled(s)),
            None => bail!("unknown scheme {name:?}; expected reference, net-based, pin-based or cte"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Reference => "reference",
            Engine::Scheduled(s) => s.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaSummary {
    pub scheme: String,
    pub tns: f64,
    pub tns_rise: f64,
    pub tns_fall: f64,
    pub wns: Option<f64>,
    pub level_count: usize,
    pub total_cycles: Option<u64>,
    pub utilization: Option<f64>,
    pub issue_efficiency: Option<f64>,
}

#[derive(Serialize)]
struct StaReport<'a> {
    manifest: ManifestStamp,
    summary: &'a StaSummary,
    records: &'a [sta_core::sta::PinRecord],
}

#[derive(Serialize)]
struct StaStdout<'a> {
    manifest: ManifestStamp,
    summary: &'a StaSummary,
}

pub fn cmd_sta(design: &Path, engine: Engine, report: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<bool> {
    let started = Instant::now();
    let d = load_design(design)?;
    let analysis = Analysis::new(&d)?;
    let geometry = WarpGeometry::default();
    let (state, cost) = match engine {
        Engine::Reference => (analysis.run(&StaConfig::default())?, None),
        Engine::Scheduled(s) => {
            let (state, cost) = execute_scheduled(
                &analysis,
                &assign(&analysis, s, &geometry),
                &CostModel::default(),
                &ExecOptions::default(),
            )?;
            (state, Some(cost))
        }
    };
    let timing = TimingReport::build(&analysis, &state);
    let s = &timing.summary;
    let summary = StaSummary {
        scheme: engine.name().to_string(),
        tns: s.tns,
        tns_rise: s.tns_rise,
        tns_fall: s.tns_fall,
        wns: s.wns.is_finite().then_some(s.wns),
        level_count: s.level_count,
        total_cycles: cost.as_ref().map(|c| c.total_cycles),
        utilization: cost.as_ref().map(|c| c.lane_utilization),
        issue_efficiency: cost.as_ref().map(|c| c.issue_efficiency),
    };
    let mut m = RunManifest::new(
        "sta",
        serde_json::json!({ "scheme": engine.name(), "geometry": geometry }),
        Some(design_hash(&d)),
        None,
    );
    if let Some(path) = report {
        let csv_path = sibling(path, "csv");
        m.outputs = vec![path.display().to_string(), csv_path.display().to_string()];
        write_json(
            path,
            &StaReport {
                manifest: m.stamp(),
                summary: &summary,
                records: &timing.records,
            },
        )?;
        write_csv(&csv_path, &timing.records)?;
    }
    emit(
        out,
        &StaStdout {
            manifest: m.stamp(),
            summary: &summary,
        },
    )?;
    finish_manifest(m, started, report.map(|p| sibling(p, "manifest.json")).as_deref())?;
    Ok(true)
}

// ---------------------------------------------------------------- compare

/// One row of `compare.csv` and of the per-scheme bench rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
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

impl From<&SchemeRun> for SchemeRow {
    fn from(r: &SchemeRun) -> Self {
        Self {
            scheme: r.scheme.name().to_string(),
            total_cycles: r.cost.total_cycles,
            work_cycles: r.cost.work_cycles,
            overhead_cycles: r.cost.overhead_cycles,
            launch_cycles: r.cost.launch_cycles,
            warps_launched: r.cost.warps_launched,
            lane_utilization: r.cost.lane_utilization,
            issue_efficiency: r.cost.issue_efficiency,
            rescheduling_steps: r.cost.rescheduling_steps,
            max_rel_error: r.diff.max_rel_error,
            exact: r.diff.exact,
            value_check: r.value_check,
        }
    }
}

pub const COMPARE_COLUMNS: [&str; 12] = [
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

#[derive(Serialize)]
struct CompareReport<'a> {
    manifest: ManifestStamp,
    design: &'a DesignSummary,
    rows: &'a [SchemeRow],
    passed: bool,
}

pub fn cmd_compare(
    design: &Path,
    out_dir: Option<&Path>,
    fault: Option<Fault>,
    out: &mut dyn Write,
) -> anyhow::Result<bool> {
    let started = Instant::now();
    let d = load_design(design)?;
    let analysis = Analysis::new(&d)?;
    let geometry = WarpGeometry::default();
    let options = ExecOptions {
        mode: ExecMode::default(),
        fault,
    };
    let comparison = compare_schemes_with(&analysis, &geometry, &CostModel::default(), &options)?;
    let rows: Vec<SchemeRow> = comparison.runs.iter().map(SchemeRow::from).collect();
    let passed = rows.iter().all(|r| r.value_check);
    for r in rows.iter().filter(|r| !r.value_check) {
        eprintln!(
            "error: {} differs from the reference by {:.3e} (tolerance {:.0e})",
            r.scheme,
            r.max_rel_error,
            sta_core::warp::VALUE_TOLERANCE
        );
    }
    let summary = DesignSummary::new(&d, analysis.num_levels());
    let mut m = RunManifest::new(
        "compare",
        serde_json::json!({ "geometry": geometry, "cost_model": CostModel::default(), "fault": fault.is_some() }),
        Some(summary.design_hash.clone()),
        None,
    );
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        m.outputs = vec!["compare.json".into(), "compare.csv".into()];
    }
    let report = CompareReport {
        manifest: m.stamp(),
        design: &summary,
        rows: &rows,
        passed,
    };
    if let Some(dir) = out_dir {
        write_json(&dir.join("compare.json"), &report)?;
        write_csv(&dir.join("compare.csv"), &rows)?;
    }
    emit(out, &report)?;
    finish_manifest(m, started, out_dir.map(|d| d.join("manifest.json")).as_deref())?;
    Ok(passed)
}

// ---------------------------------------------------------------- grad

/// Half the largest-magnitude gradients, half evenly spaced coordinates.
pub fn sample_coordinates(design: &Design, g: &GradientState, n: usize) -> Vec<Coordinate> {
    let all = GradientState::coordinates(design);
    if n == 0 || n >= all.len() {
        return all;
    }
    let mut by_size = all.clone();
    by_size.sort_by(|a, b| g.gradient(*b).abs().total_cmp(&g.gradient(*a).abs()).then(a.cmp(b)));
    let mut picked: Vec<Coordinate> = by_size[..n / 2].to_vec();
    let rest = n - picked.len();
    let stride = all.len() as f64 / rest as f64;
    picked.extend((0..rest).map(|i| all[(i as f64 * stride) as usize]));
    picked.sort();
    picked.dedup();
    picked
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionSummary {
    pub granularity: usize,
    pub levels: usize,
    pub sequential_makespan: f64,
    pub fused_makespan: f64,
    pub overlap_fraction: f64,
    pub sequential_overhead: f64,
    pub fused_overhead: f64,
    /// Fused outputs are bit-identical to the sequential pipeline.
    pub equivalent: bool,
}

/// Runs the fused pipeline and compares it against `state` and `gradient`.
pub fn fusion_summary(
    analysis: &Analysis<'_>,
    state: &sta_core::sta::TimingState,
    gradient: &GradientState,
    grad: &GradConfig,
    granularity: usize,
    grad_scale: f64,
) -> anyhow::Result<(FusionSummary, Vec<TraceRecord>)> {
    let costs = KernelCosts::simulated(analysis, &WarpGeometry::default(), &CostModel::default(), grad_scale);
    let cfg = FusionConfig {
        granularity,
        ..FusionConfig::default()
    };
    let run = execute_fused(analysis, &costs, &cfg, &StaConfig::default(), grad)?;
    let graph = build_kernel_graph(&costs, granularity)?;
    let seq = schedule_sequential(&graph);
    let fused = schedule_fused(&graph, cfg.contention)?;
    let sta_only = seq.sta_total;
    let ratio = |x: f64| if sta_only > 0.0 { x / sta_only } else { 1.0 };
    Ok((
        FusionSummary {
            granularity,
            levels: analysis.num_levels(),
            sequential_makespan: seq.makespan,
            fused_makespan: fused.makespan,
            overlap_fraction: fused.overlap_fraction,
            sequential_overhead: ratio(seq.makespan),
            fused_overhead: ratio(fused.makespan),
            equivalent: run.state.bit_identical(state) && run.gradient.bit_identical(gradient),
        },
        fused.trace(&graph),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub kind: String,
    pub index: usize,
    pub edge: String,
    /// Late delay of the coordinate in seconds.
    pub delay: f64,
    pub gradient: f64,
}

impl GradientRow {
    fn new(c: Coordinate, state: &TimingState, gradient: f64) -> Self {
        let (kind, index, delay) = match c {
            Coordinate::Arc { arc, edge } => ("arc", arc, late_pair(state.arc_delay[arc])[edge]),
            Coordinate::NetEdge { pin, edge } => ("net_edge", pin, late_pair(state.edge_delay[pin])[edge]),
        };
        Self {
            kind: kind.into(),
            index,
            edge: c.edge().name().into(),
            delay,
            gradient,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradOptions {
    pub gamma: Option<f64>,
    pub loss: LossKind,
    pub check: bool,
    pub strict: bool,
    /// Finite-difference step as a fraction of the clock period.
    pub epsilon: f64,
    pub check_sample: usize,
    pub fuse: bool,
    pub granularity: usize,
    pub grad_scale: f64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct MaxGradient {
    coordinate: Coordinate,
    value: f64,
}

#[derive(Serialize)]
struct GradReport {
    manifest: ManifestStamp,
    gamma: f64,
    loss_kind: LossKind,
    hard_tns: f64,
    smooth_loss: f64,
    coordinates: usize,
    nonzero_gradients: usize,
    max_gradient: Option<MaxGradient>,
    check: Option<FdReport>,
    fusion: Option<FusionSummary>,
    passed: bool,
}

pub fn cmd_grad(design: &Path, opts: &GradOptions, out: &mut dyn Write) -> anyhow::Result<bool> {
    let started = Instant::now();
    let d = load_design(design)?;
    let analysis = Analysis::new(&d)?;
    let gamma = opts.gamma.unwrap_or(0.01 * d.clock_period);
    if !(gamma.is_finite() && gamma > 0.0) {
        bail!("gamma must be positive, got {gamma}");
    }
    let cfg = GradConfig { gamma, loss: opts.loss };
    let state = analysis.run(&StaConfig::default())?;
    let g = run_gradient(&analysis, &state, &cfg)?;
    let coords = GradientState::coordinates(&d);
    let mut passed = true;
    let check = if opts.check {
        let sample = sample_coordinates(&d, &g, opts.check_sample);
        let r = finite_diff_check_at(&analysis, &state, &cfg, opts.epsilon * d.clock_period, &sample)?;
        if !r.passed() {
            eprintln!(
                "warning: finite-difference error {:.3e} at {:?}{}",
                r.max_rel_error,
                r.worst,
                if r.epsilon_dominated { " (step-dominated)" } else { "" }
            );
            passed &= !opts.strict;
        }
        Some(r)
    } else {
        None
    };
    let (fusion, trace) = if opts.fuse {
        let (f, t) = fusion_summary(&analysis, &state, &g, &cfg, opts.granularity, opts.grad_scale)?;
        if !f.equivalent {
            eprintln!("error: fused outputs differ from the sequential pipeline");
            passed = false;
        }
        if f.fused_makespan > f.sequential_makespan {
            eprintln!("error: fused makespan exceeds the sequential makespan");
            passed = false;
        }
        (Some(f), t)
    } else {
        (None, Vec::new())
    };
    let mut m = RunManifest::new(
        "grad",
        serde_json::json!({
            "gamma": gamma,
            "loss": opts.loss,
            "check": opts.check,
            "strict": opts.strict,
            "epsilon": opts.epsilon,
            "check_sample": opts.check_sample,
            "fuse": opts.fuse,
            "granularity": opts.granularity,
            "grad_scale": opts.grad_scale,
        }),
        Some(design_hash(&d)),
        None,
    );
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        m.outputs = vec!["grad.json".into(), "gradients.csv".into()];
        if opts.fuse {
            m.outputs.push("trace.csv".into());
        }
    }
    let report = GradReport {
        manifest: m.stamp(),
        gamma,
        loss_kind: opts.loss,
        hard_tns: tns(&d, &state).total,
        smooth_loss: g.loss,
        coordinates: coords.len(),
        nonzero_gradients: coords.iter().filter(|&&c| g.gradient(c) != 0.0).count(),
        max_gradient: g.max_gradient(&d).map(|(coordinate, value)| MaxGradient { coordinate, value }),
        check,
        fusion,
        passed,
    };
    if let Some(dir) = &opts.out_dir {
        write_json(&dir.join("grad.json"), &report)?;
        let rows: Vec<GradientRow> = coords.iter().map(|&c| GradientRow::new(c, &state, g.gradient(c))).collect();
        write_csv(&dir.join("gradients.csv"), &rows)?;
        if opts.fuse {
            write_csv(&dir.join("trace.csv"), &trace)?;
        }
    }
    emit(out, &report)?;
    finish_manifest(m, started, opts.out_dir.as_ref().map(|d| d.join("manifest.json")).as_deref())?;
    Ok(passed)
}
