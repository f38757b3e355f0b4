// SPDX-License-Identifier: Apache-2.0

//! Runs the kernel graph for real. The timing side owns the timing state and
//! the gradient side owns the gradient state; the only data crossing between
//! them is carried by events: late delays of the levels an event covers, and
//! a gate that releases the gradient backward pass.

use std::ops::RangeInclusive;
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diff::{
    backward_grad_level, begin_backward, finish_backward, forward_lse_level_with, late_pair, GradConfig,
    GradientState,
};
use crate::sta::propagate::Analysis;
use crate::sta::{StaConfig, TimingState};

use super::schedule::{schedule_fused, ScheduleResult};
use super::{build_kernel_graph, FusionError, Kernel, KernelCosts, KernelGraph, KernelKind, Stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// One thread per stream, synchronized by events.
    #[default]
    Concurrent,
    /// One thread running kernels in the fused schedule's start order.
    Interleaved,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub granularity: usize,
    pub mode: ExecutionMode,
    /// Cost multiplier for gradient kernels sharing the device with timing kernels.
    pub contention: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            granularity: super::DEFAULT_GRANULARITY,
            mode: ExecutionMode::Concurrent,
            contention: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FusedRun {
    pub state: TimingState,
    pub gradient: GradientState,
    pub graph: KernelGraph,
    pub schedule: ScheduleResult,
    /// Wall time of each kernel, indexed by kernel id.
    pub measured_seconds: Vec<f64>,
}

#[derive(Debug)]
enum Message {
    /// Late `[rise, fall]` delays of the arcs into the level roots and of the
    /// member edges, for every level in `levels`.
    Delays {
        event: usize,
        levels: RangeInclusive<usize>,
        arcs: Vec<(usize, [f64; 2])>,
        edges: Vec<(usize, [f64; 2])>,
    },
    Gate {
        event: usize,
    },
}

impl Message {
    fn event(&self) -> usize {
        match self {
            Message::Delays { event, .. } | Message::Gate { event } => *event,
        }
    }
}

fn violation(kernel: &Kernel, detail: impl Into<String>) -> FusionError {
    FusionError::DependencyViolation {
        kernel: kernel.id,
        detail: detail.into(),
    }
}

struct StaSide<'a, 'd> {
    analysis: &'a Analysis<'d>,
    graph: &'a KernelGraph,
    config: StaConfig,
    state: TimingState,
    /// First level whose delays have not been sent.
    unsent: usize,
}

impl<'a, 'd> StaSide<'a, 'd> {
    fn new(analysis: &'a Analysis<'d>, graph: &'a KernelGraph, config: StaConfig) -> Self {
        Self {
            analysis,
            graph,
            config,
            state: analysis.new_state(),
            unsent: 0,
        }
    }

    fn run(&mut self, k: &Kernel) -> Result<Vec<Message>, FusionError> {
        let a = self.analysis;
        match (k.kind, k.level) {
            (KernelKind::NetRc, _) => a.compute_rc(&mut self.state, self.config.reduction),
            (KernelKind::CellDelayAt, Some(l)) => a.forward_level(l, &mut self.state)?,
            (KernelKind::SlackBwd, Some(l)) => {
                a.backward_level(l, &mut self.state)?;
                if l == 0 {
                    a.finish(&mut self.state)?;
                }
            }
            _ => return Err(violation(k, "not a timing kernel")),
        }
        let mut out = Vec::new();
        for e in self.graph.cross_edges().filter(|e| e.from == k.id) {
            let to = &self.graph.kernels[e.to];
            match to.kind {
                KernelKind::LseFwd => {
                    let last = k.level.ok_or_else(|| violation(k, "event without a level"))?;
                    out.push(self.delays(k.id, self.unsent..=last));
                    self.unsent = last + 1;
                }
                _ => out.push(Message::Gate { event: k.id }),
            }
        }
        Ok(out)
    }

    fn delays(&self, event: usize, levels: RangeInclusive<usize>) -> Message {
        let a = self.analysis;
        let (mut arcs, mut edges) = (Vec::new(), Vec::new());
        for l in levels.clone() {
            for &net in &a.schedule.levels[l] {
                let topo = a.design.net(net);
                for &arc in &a.index.fanin_arcs[topo.root.index()] {
                    arcs.push((arc.index(), late_pair(self.state.arc_delay[arc.index()])));
                }
                for m in &topo.members {
                    edges.push((m.pin.index(), late_pair(self.state.edge_delay[m.pin.index()])));
                }
            }
        }
        Message::Delays {
            event,
            levels,
            arcs,
            edges,
        }
    }

    /// Completes a design without levels, whose stream has no required-time kernel.
    fn close(&mut self) -> Result<(), FusionError> {
        if self.graph.num_levels == 0 {
            self.analysis.finish(&mut self.state)?;
        }
        Ok(())
    }
}

struct GradSide<'a, 'd> {
    analysis: &'a Analysis<'d>,
    graph: &'a KernelGraph,
    state: GradientState,
    arc_delay: Vec<[f64; 2]>,
    edge_delay: Vec<[f64; 2]>,
    have_level: Vec<bool>,
    gate: bool,
    received: Vec<bool>,
}

impl<'a, 'd> GradSide<'a, 'd> {
    fn new(analysis: &'a Analysis<'d>, graph: &'a KernelGraph, config: GradConfig) -> Self {
        let d = analysis.design;
        Self {
            analysis,
            graph,
            state: GradientState::new(d, config),
            arc_delay: vec![[f64::NAN; 2]; d.arcs.len()],
            edge_delay: vec![[f64::NAN; 2]; d.pins.len()],
            have_level: vec![false; graph.num_levels],
            gate: false,
            received: vec![false; graph.kernels.len()],
        }
    }

    fn receive(&mut self, m: Message) {
        self.received[m.event()] = true;
        match m {
            Message::Delays {
                levels, arcs, edges, ..
            } => {
                for (i, v) in arcs {
                    self.arc_delay[i] = v;
                }
                for (i, v) in edges {
                    self.edge_delay[i] = v;
                }
                for l in levels {
                    self.have_level[l] = true;
                }
            }
            Message::Gate { .. } => self.gate = true,
        }
    }

    /// Events `k` waits on that have not arrived yet.
    fn waiting(&self, k: &Kernel) -> bool {
        self.graph
            .cross_edges()
            .any(|e| e.to == k.id && !self.received[e.from])
    }

    fn run(&mut self, k: &Kernel) -> Result<(), FusionError> {
        let a = self.analysis;
        let last = self.graph.num_levels.checked_sub(1);
        match (k.kind, k.level) {
            (KernelKind::LseFwd, Some(l)) => {
                if !self.have_level[l] {
                    return Err(violation(k, format!("delays of level {l} have not arrived")));
                }
                let (arcs, edges) = (&self.arc_delay, &self.edge_delay);
                forward_lse_level_with(a, l, &|i, e| arcs[i][e], &|i, e| edges[i][e], &mut self.state)?;
            }
            (KernelKind::GradBwd, Some(l)) => {
                if Some(l) == last {
                    if !self.gate {
                        return Err(violation(k, "required times are not final"));
                    }
                    begin_backward(a, &mut self.state)?;
                }
                backward_grad_level(a, l, &mut self.state)?;
                if l == 0 {
                    finish_backward(a, &mut self.state)?;
                }
            }
            _ => return Err(violation(k, "not a gradient kernel")),
        }
        Ok(())
    }

    fn close(&mut self) -> Result<(), FusionError> {
        if self.graph.num_levels == 0 {
            begin_backward(self.analysis, &mut self.state)?;
            finish_backward(self.analysis, &mut self.state)?;
        }
        Ok(())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

/// Runs `order` on one thread. Every kernel must appear once, after all of
/// its predecessors.
pub fn execute_interleaved(
    analysis: &Analysis<'_>,
    graph: &KernelGraph,
    order: &[usize],
    sta: &StaConfig,
    grad: &GradConfig,
) -> Result<(TimingState, GradientState, Vec<f64>), FusionError> {
    let n = graph.kernels.len();
    let preds = graph.predecessors();
    let mut done = vec![false; n];
    let mut seconds = vec![0.0; n];
    let mut s = StaSide::new(analysis, graph, *sta);
    let mut g = GradSide::new(analysis, graph, *grad);
    for &id in order {
        let k = graph
            .kernels
            .get(id)
            .ok_or_else(|| FusionError::DependencyViolation {
                kernel: id,
                detail: "unknown kernel".into(),
            })?;
        if done[id] {
            return Err(violation(k, "scheduled twice"));
        }
        if let Some(&p) = preds[id].iter().find(|&&p| !done[p]) {
            return Err(violation(k, format!("predecessor {p} has not run")));
        }
        let (r, t) = timed(|| match k.stream {
            Stream::Sta => s.run(k).map(|msgs| msgs.into_iter().for_each(|m| g.receive(m))),
            Stream::Grad => g.run(k),
        });
        r?;
        seconds[id] = t;
        done[id] = true;
    }
    if let Some(id) = done.iter().position(|d| !d) {
        return Err(violation(&graph.kernels[id], "never scheduled"));
    }
    s.close()?;
    g.close()?;
    Ok((s.state, g.state, seconds))
}

fn execute_concurrent(
    analysis: &Analysis<'_>,
    graph: &KernelGraph,
    sta: &StaConfig,
    grad: &GradConfig,
) -> Result<(TimingState, GradientState, Vec<f64>), FusionError> {
    let (tx, rx) = mpsc::channel::<Message>();
    let (sta_result, grad_result) = std::thread::scope(|scope| {
        let sta_thread = scope.spawn(move || {
            let mut s = StaSide::new(analysis, graph, *sta);
            let mut seconds = Vec::new();
            for k in graph.stream_kernels(Stream::Sta) {
                let (msgs, t) = timed(|| s.run(k));
                seconds.push((k.id, t));
                for m in msgs? {
                    // A closed channel means the gradient side already failed.
                    let _ = tx.send(m);
                }
            }
            s.close()?;
            Ok::<_, FusionError>((s.state, seconds))
        });
        let grad_thread = scope.spawn(move || {
            let mut g = GradSide::new(analysis, graph, *grad);
            let mut seconds = Vec::new();
            for k in graph.stream_kernels(Stream::Grad) {
                while g.waiting(k) {
                    match rx.recv() {
                        Ok(m) => g.receive(m),
                        Err(_) => return Err(violation(k, "timing stream ended before signalling")),
                    }
                }
                let (r, t) = timed(|| g.run(k));
                r?;
                seconds.push((k.id, t));
            }
            g.close()?;
            Ok::<_, FusionError>((g.state, seconds))
        });
        let s = sta_thread.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
        let g = grad_thread.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
        (s, g)
    });
    let (state, s_sec) = sta_result?;
    let (gradient, g_sec) = grad_result?;
    let mut seconds = vec![0.0; graph.kernels.len()];
    for (id, t) in s_sec.into_iter().chain(g_sec) {
        seconds[id] = t;
    }
    Ok((state, gradient, seconds))
}

/// Builds the kernel graph from `costs`, schedules it and executes it.
pub fn execute_fused(
    analysis: &Analysis<'_>,
    costs: &KernelCosts,
    cfg: &FusionConfig,
    sta: &StaConfig,
    grad: &GradConfig,
) -> Result<FusedRun, FusionError> {
    if costs.num_levels() != analysis.num_levels() {
        return Err(FusionError::MissingCost {
            kind: KernelKind::CellDelayAt,
            level: costs.num_levels().min(analysis.num_levels()),
        });
    }
    let graph = build_kernel_graph(costs, cfg.granularity)?;
    let schedule = schedule_fused(&graph, cfg.contention)?;
    let (state, gradient, measured_seconds) = match cfg.mode {
        ExecutionMode::Concurrent => execute_concurrent(analysis, &graph, sta, grad)?,
        ExecutionMode::Interleaved => execute_interleaved(analysis, &graph, &schedule.order(&graph), sta, grad)?,
    };
    Ok(FusedRun {
        state,
        gradient,
        graph,
        schedule,
        measured_seconds,
    })
}
