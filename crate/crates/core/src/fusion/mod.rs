// SPDX-License-Identifier: Apache-2.0

//! Two-stream overlap of timing and gradient kernels.
//!
//! The timing stream runs the RC kernel, one arrival kernel per level and
//! one required-time kernel per level in reverse. The gradient stream runs
//! one smooth-arrival kernel per level and one gradient kernel per level in
//! reverse. Events let the smooth-arrival kernels of a level group start as
//! soon as the arrival kernel of the group's last level has finished.

pub mod execute;
pub mod schedule;

use serde::{Deserialize, Serialize};

use crate::sta::propagate::Analysis;
use crate::warp::{assign, cost_report, CostModel, CostReport, KernelKind as WarpKernel, Scheme, WarpGeometry};

pub use execute::{execute_fused, execute_interleaved, ExecutionMode, FusedRun, FusionConfig};
pub use schedule::{check_schedule, schedule_fused, schedule_sequential, ScheduleResult, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Sta,
    Grad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    NetRc,
    CellDelayAt,
    SlackBwd,
    LseFwd,
    GradBwd,
}

impl KernelKind {
    pub fn stream(self) -> Stream {
        match self {
            KernelKind::NetRc | KernelKind::CellDelayAt | KernelKind::SlackBwd => Stream::Sta,
            KernelKind::LseFwd | KernelKind::GradBwd => Stream::Grad,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub id: usize,
    pub stream: Stream,
    pub kind: KernelKind,
    /// `None` for the RC kernel.
    pub level: Option<usize>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventEdge {
    pub from: usize,
    pub to: usize,
}

/// Per-level kernel costs in cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCosts {
    pub net_rc: f64,
    pub cell_delay_at: Vec<f64>,
    pub slack_bwd: Vec<f64>,
    pub lse_fwd: Vec<f64>,
    pub grad_bwd: Vec<f64>,
}

impl KernelCosts {
    /// Timing costs from a simulated cost report; gradient kernels cost
    /// `grad_scale` times the timing kernel of the same level and direction.
    pub fn from_report(report: &CostReport, levels: usize, grad_scale: f64) -> Self {
        let mut c = Self {
            net_rc: 0.0,
            cell_delay_at: vec![0.0; levels],
            slack_bwd: vec![0.0; levels],
            lse_fwd: vec![0.0; levels],
            grad_bwd: vec![0.0; levels],
        };
        for k in &report.kernels {
            let cycles = k.cycles as f64;
            match (k.kind, k.level) {
                (WarpKernel::Rc, _) => c.net_rc += cycles,
                (WarpKernel::Forward, Some(l)) => c.cell_delay_at[l] = cycles,
                (WarpKernel::Backward, Some(l)) => c.slack_bwd[l] = cycles,
                _ => {}
            }
        }
        c.lse_fwd = c.cell_delay_at.iter().map(|x| x * grad_scale).collect();
        c.grad_bwd = c.slack_bwd.iter().map(|x| x * grad_scale).collect();
        c
    }

    /// Pin-based simulated costs for `analysis`.
    pub fn simulated(analysis: &Analysis<'_>, geometry: &WarpGeometry, model: &CostModel, grad_scale: f64) -> Self {
        let assignment = assign(analysis, Scheme::PinBased, geometry);
        Self::from_report(&cost_report(&assignment, model), analysis.num_levels(), grad_scale)
    }

    pub fn num_levels(&self) -> usize {
        self.cell_delay_at.len()
    }

    pub fn sta_total(&self) -> f64 {
        self.net_rc + self.cell_delay_at.iter().sum::<f64>() + self.slack_bwd.iter().sum::<f64>()
    }

    pub fn grad_total(&self) -> f64 {
        self.lse_fwd.iter().sum::<f64>() + self.grad_bwd.iter().sum::<f64>()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("missing cost for {kind:?} kernel of level {level}")]
    MissingCost { kind: KernelKind, level: usize },
    #[error("invalid cost {value} for kernel {kernel}")]
    InvalidCost { kernel: usize, value: f64 },
    #[error("kernel graph has a cycle")]
    Cycle,
    #[error("no kernel can start: stream heads wait on each other")]
    Deadlock,
    #[error("dependency violation at kernel {kernel}: {detail}")]
    DependencyViolation { kernel: usize, detail: String },
    #[error(transparent)]
    Sta(#[from] crate::sta::StaError),
}

/// Kernels of both streams with event and in-stream edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGraph {
    pub kernels: Vec<Kernel>,
    /// Cross-stream events and in-stream order edges.
    pub edges: Vec<EventEdge>,
    pub granularity: usize,
    pub num_levels: usize,
}

/// Default number of levels behind one event.
pub const DEFAULT_GRANULARITY: usize = 10;

impl KernelGraph {
    pub fn stream_kernels(&self, stream: Stream) -> impl Iterator<Item = &Kernel> {
        self.kernels.iter().filter(move |k| k.stream == stream)
    }

    /// Edges between kernels of different streams.
    pub fn cross_edges(&self) -> impl Iterator<Item = &EventEdge> {
        self.edges
            .iter()
            .filter(|e| self.kernels[e.from].stream != self.kernels[e.to].stream)
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.kernels.len()];
        for e in &self.edges {
            preds[e.to].push(e.from);
        }
        preds
    }

    pub fn find(&self, kind: KernelKind, level: Option<usize>) -> Option<usize> {
        self.kernels.iter().position(|k| k.kind == kind && k.level == level)
    }

    /// Kahn's algorithm over all edges.
    pub fn check_acyclic(&self) -> Result<(), FusionError> {
        let n = self.kernels.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            indeg[e.to] += 1;
            succ[e.from].push(e.to);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
        let mut seen = 0;
        while let Some(k) = queue.pop() {
            seen += 1;
            for &s in &succ[k] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push(s);
                }
            }
        }
        if seen == n {
            Ok(())
        } else {
            Err(FusionError::Cycle)
        }
    }
}

/// Builds the two kernel streams. With `granularity` k, levels form groups
/// of k; the arrival kernel of a group's last level signals the
/// smooth-arrival kernel of its first level. The first gradient kernel waits
/// for the first required-time kernel.
pub fn build_kernel_graph(costs: &KernelCosts, granularity: usize) -> Result<KernelGraph, FusionError> {
    let levels = costs.num_levels();
    for (kind, v) in [
        (KernelKind::SlackBwd, &costs.slack_bwd),
        (KernelKind::LseFwd, &costs.lse_fwd),
        (KernelKind::GradBwd, &costs.grad_bwd),
    ] {
        if v.len() < levels {
            return Err(FusionError::MissingCost { kind, level: v.len() });
        }
    }
    let granularity = granularity.max(1);
    let mut kernels = Vec::with_capacity(1 + 4 * levels);
    let mut push = |kind: KernelKind, level: Option<usize>, cost: f64| -> Result<usize, FusionError> {
        let id = kernels.len();
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(FusionError::InvalidCost { kernel: id, value: cost });
        }
        kernels.push(Kernel {
            id,
            stream: kind.stream(),
            kind,
            level,
            cost,
        });
        Ok(id)
    };
    let mut sta = vec![push(KernelKind::NetRc, None, costs.net_rc)?];
    let mut at = Vec::with_capacity(levels);
    for l in 0..levels {
        at.push(push(KernelKind::CellDelayAt, Some(l), costs.cell_delay_at[l])?);
    }
    sta.extend(&at);
    let mut slack = vec![0; levels];
    for l in (0..levels).rev() {
        slack[l] = push(KernelKind::SlackBwd, Some(l), costs.slack_bwd[l])?;
        sta.push(slack[l]);
    }
    let mut lse = Vec::with_capacity(levels);
    for l in 0..levels {
        lse.push(push(KernelKind::LseFwd, Some(l), costs.lse_fwd[l])?);
    }
    let mut grad = lse.clone();
    let mut gbwd = vec![0; levels];
    for l in (0..levels).rev() {
        gbwd[l] = push(KernelKind::GradBwd, Some(l), costs.grad_bwd[l])?;
        grad.push(gbwd[l]);
    }

    let mut edges: Vec<EventEdge> = sta
        .windows(2)
        .chain(grad.windows(2))
        .map(|w| EventEdge { from: w[0], to: w[1] })
        .collect();
    for start in (0..levels).step_by(granularity) {
        let last = (start + granularity).min(levels) - 1;
        edges.push(EventEdge {
            from: at[last],
            to: lse[start],
        });
    }
    if levels > 0 {
        edges.push(EventEdge {
            from: slack[levels - 1],
            to: gbwd[levels - 1],
        });
    }
    let graph = KernelGraph {
        kernels,
        edges,
        granularity,
        num_levels: levels,
    };
    graph.check_acyclic()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn costs(sta: &[f64], grad: &[f64]) -> KernelCosts {
        let n = sta.len();
        KernelCosts {
            net_rc: 0.0,
            cell_delay_at: sta.to_vec(),
            slack_bwd: vec![0.0; n],
            lse_fwd: grad.to_vec(),
            grad_bwd: vec![0.0; n],
        }
    }

    fn lse_events(g: &KernelGraph) -> Vec<(usize, usize)> {
        g.cross_edges()
            .filter(|e| g.kernels[e.to].kind == KernelKind::LseFwd)
            .map(|e| (g.kernels[e.from].level.unwrap(), g.kernels[e.to].level.unwrap()))
            .collect()
    }

    #[test]
    fn per_level_events() {
        let g = build_kernel_graph(&costs(&[1.0; 3], &[1.0; 3]), 1).unwrap();
        assert_eq!(lse_events(&g), vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(g.kernels.len(), 1 + 4 * 3);
        assert_eq!(g.stream_kernels(Stream::Sta).count(), 7);
    }

    #[test]
    fn grouped_events() {
        let g = build_kernel_graph(&costs(&[1.0; 30], &[1.0; 30]), 10).unwrap();
        assert_eq!(lse_events(&g), vec![(9, 0), (19, 10), (29, 20)]);
        let g = build_kernel_graph(&costs(&[1.0; 25], &[1.0; 25]), 10).unwrap();
        assert_eq!(lse_events(&g), vec![(9, 0), (19, 10), (24, 20)]);
    }

    #[test]
    fn every_smooth_kernel_follows_its_level_and_predecessor() {
        let g = build_kernel_graph(&costs(&[1.0; 7], &[1.0; 7]), 3).unwrap();
        let preds = g.predecessors();
        for l in 1..7 {
            let k = g.find(KernelKind::LseFwd, Some(l)).unwrap();
            assert!(preds[k].contains(&g.find(KernelKind::LseFwd, Some(l - 1)).unwrap()));
        }
        g.check_acyclic().unwrap();
    }

    #[test]
    fn missing_cost_is_reported() {
        let mut c = costs(&[1.0; 3], &[1.0; 3]);
        c.grad_bwd.pop();
        assert!(matches!(build_kernel_graph(&c, 1), Err(FusionError::MissingCost { .. })));
    }

    #[test]
    fn cycle_is_detected() {
        let mut g = build_kernel_graph(&costs(&[1.0; 2], &[1.0; 2]), 1).unwrap();
        let last = g.kernels.len() - 1;
        g.edges.push(EventEdge { from: last, to: 0 });
        assert!(matches!(g.check_acyclic(), Err(FusionError::Cycle)));
    }
}
