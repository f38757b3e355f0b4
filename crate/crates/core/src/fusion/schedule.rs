// SPDX-License-Identifier: Apache-2.0

//! Makespans of the sequential and the two-lane fused schedules.

use serde::{Deserialize, Serialize};

use super::{FusionError, KernelGraph, KernelKind, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    /// Indexed by kernel id.
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub makespan: f64,
    /// Gradient-kernel time overlapped with busy timing-stream time, over
    /// total gradient-kernel time.
    pub overlap_fraction: f64,
    /// Makespan of the timing stream alone.
    pub sta_total: f64,
}

impl ScheduleResult {
    /// Makespan with gradients relative to the timing stream alone.
    pub fn overhead(&self) -> f64 {
        if self.sta_total > 0.0 {
            self.makespan / self.sta_total
        } else {
            1.0
        }
    }

    pub fn trace(&self, graph: &KernelGraph) -> Vec<TraceRecord> {
        graph
            .kernels
            .iter()
            .map(|k| TraceRecord {
                id: k.id,
                stream: k.stream,
                kind: k.kind,
                level: k.level,
                start: self.start[k.id],
                finish: self.finish[k.id],
            })
            .collect()
    }

    /// Kernel ids by start time, timing stream first on ties.
    pub fn order(&self, graph: &KernelGraph) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..graph.kernels.len()).collect();
        ids.sort_by(|&a, &b| {
            self.start[a]
                .total_cmp(&self.start[b])
                .then((graph.kernels[a].stream == Stream::Grad).cmp(&(graph.kernels[b].stream == Stream::Grad)))
                .then(a.cmp(&b))
        });
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: usize,
    pub stream: Stream,
    pub kind: KernelKind,
    pub level: Option<usize>,
    pub start: f64,
    pub finish: f64,
}

fn overlap_fraction(graph: &KernelGraph, start: &[f64], finish: &[f64]) -> f64 {
    let sta: Vec<(f64, f64)> = graph
        .stream_kernels(Stream::Sta)
        .map(|k| (start[k.id], finish[k.id]))
        .collect();
    let mut overlapped = 0.0;
    let mut total = 0.0;
    for k in graph.stream_kernels(Stream::Grad) {
        let (s, f) = (start[k.id], finish[k.id]);
        total += f - s;
        for &(a, b) in &sta {
            overlapped += (f.min(b) - s.max(a)).max(0.0);
        }
    }
    if total > 0.0 {
        overlapped / total
    } else {
        0.0
    }
}

fn result(graph: &KernelGraph, start: Vec<f64>, finish: Vec<f64>) -> ScheduleResult {
    let makespan = finish.iter().copied().fold(0.0, f64::max);
    let overlap_fraction = overlap_fraction(graph, &start, &finish);
    ScheduleResult {
        start,
        finish,
        makespan,
        overlap_fraction,
        sta_total: graph.stream_kernels(Stream::Sta).map(|k| k.cost).sum(),
    }
}

/// One lane: the timing stream in order, then the gradient stream.
pub fn schedule_sequential(graph: &KernelGraph) -> ScheduleResult {
    let n = graph.kernels.len();
    let (mut start, mut finish) = (vec![0.0; n], vec![0.0; n]);
    let mut t = 0.0;
    for k in graph.stream_kernels(Stream::Sta).chain(graph.stream_kernels(Stream::Grad)) {
        start[k.id] = t;
        t += k.cost;
        finish[k.id] = t;
    }
    result(graph, start, finish)
}

/// One lane per stream. Each lane runs its kernels in order; a kernel
/// starts once its lane is free and all its predecessors have finished.
/// Gradient kernels that start while the timing stream still has work
/// cost `contention` times their nominal cost.
pub fn schedule_fused(graph: &KernelGraph, contention: f64) -> Result<ScheduleResult, FusionError> {
    let n = graph.kernels.len();
    let preds = graph.predecessors();
    let lanes: [Vec<usize>; 2] = [
        graph.stream_kernels(Stream::Sta).map(|k| k.id).collect(),
        graph.stream_kernels(Stream::Grad).map(|k| k.id).collect(),
    ];
    let mut head = [0usize; 2];
    let mut free = [0.0f64; 2];
    let mut done = vec![false; n];
    let (mut start, mut finish) = (vec![0.0; n], vec![0.0; n]);
    while head[0] < lanes[0].len() || head[1] < lanes[1].len() {
        let mut best: Option<(f64, usize)> = None;
        for lane in 0..2 {
            let Some(&k) = lanes[lane].get(head[lane]) else {
                continue;
            };
            if !preds[k].iter().all(|&p| done[p]) {
                continue;
            }
            let ready = preds[k].iter().map(|&p| finish[p]).fold(free[lane], f64::max);
            if best.is_none_or(|(t, _)| ready < t) {
                best = Some((ready, lane));
            }
        }
        let Some((t, lane)) = best else {
            return Err(FusionError::Deadlock);
        };
        let k = lanes[lane][head[lane]];
        let sta_busy = head[0] < lanes[0].len();
        let factor = if lane == 1 && sta_busy { contention } else { 1.0 };
        start[k] = t;
        finish[k] = t + graph.kernels[k].cost * factor;
        free[lane] = finish[k];
        done[k] = true;
        head[lane] += 1;
    }
    Ok(result(graph, start, finish))
}

/// Checks stream exclusivity, every edge and the makespan.
pub fn check_schedule(graph: &KernelGraph, r: &ScheduleResult) -> Result<(), String> {
    for stream in [Stream::Sta, Stream::Grad] {
        let mut spans: Vec<(f64, f64, usize)> = graph
            .stream_kernels(stream)
            .map(|k| (r.start[k.id], r.finish[k.id], k.id))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(format!("kernels {} and {} overlap on {:?}", w[0].2, w[1].2, stream));
            }
        }
    }
    for e in &graph.edges {
        if r.start[e.to] < r.finish[e.from] {
            return Err(format!("kernel {} starts before kernel {} finishes", e.to, e.from));
        }
    }
    let max = r.finish.iter().copied().fold(0.0, f64::max);
    if max != r.makespan {
        return Err(format!("makespan {} differs from last finish {}", r.makespan, max));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::tests::costs;
    use crate::fusion::{build_kernel_graph, KernelCosts};
    use proptest::prelude::*;

    #[test]
    fn sequential_is_the_sum() {
        let g = build_kernel_graph(&costs(&[10.0; 3], &[5.0; 3]), 1).unwrap();
        assert_eq!(schedule_sequential(&g).makespan, 45.0);
        let g = build_kernel_graph(&costs(&[10.0; 3], &[0.0; 3]), 1).unwrap();
        assert_eq!(schedule_sequential(&g).makespan, 30.0);
    }

    #[test]
    fn fused_overlaps_per_level() {
        let g = build_kernel_graph(&costs(&[10.0; 3], &[5.0; 3]), 1).unwrap();
        let r = schedule_fused(&g, 1.0).unwrap();
        let finishes: Vec<f64> = (0..3)
            .map(|l| r.finish[g.find(KernelKind::LseFwd, Some(l)).unwrap()])
            .collect();
        assert_eq!(finishes, vec![15.0, 25.0, 35.0]);
        assert_eq!(r.makespan, 35.0);
        check_schedule(&g, &r).unwrap();
        assert!((r.overlap_fraction - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn free_gradients_cost_nothing() {
        let g = build_kernel_graph(&costs(&[10.0, 3.0, 7.0], &[0.0; 3]), 1).unwrap();
        let f = schedule_fused(&g, 1.0).unwrap();
        assert_eq!(f.makespan, schedule_sequential(&g).makespan);
        assert_eq!(f.makespan, 20.0);
    }

    #[test]
    fn overhead_shape() {
        // Gradient work is a third of the timing work.
        let n = 30;
        let c = KernelCosts {
            net_rc: 30.0,
            cell_delay_at: vec![10.0; n],
            slack_bwd: vec![10.0; n],
            lse_fwd: vec![10.0 / 3.0; n],
            grad_bwd: vec![10.0 / 3.0; n],
        };
        let g = build_kernel_graph(&c, 10).unwrap();
        let seq = schedule_sequential(&g);
        let fused = schedule_fused(&g, 1.0).unwrap();
        assert!((seq.overhead() - (1.0 + 200.0 / 630.0)).abs() < 1e-9);
        assert!(fused.overhead() < seq.overhead());
    }

    fn arb_costs() -> impl Strategy<Value = (KernelCosts, usize)> {
        (1usize..12).prop_flat_map(|n| {
            let v = move || proptest::collection::vec(0.0f64..20.0, n);
            (0.0f64..20.0, v(), v(), v(), v(), 1usize..14).prop_map(|(rc, a, b, c, d, k)| {
                (
                    KernelCosts {
                        net_rc: rc,
                        cell_delay_at: a,
                        slack_bwd: b,
                        lse_fwd: c,
                        grad_bwd: d,
                    },
                    k,
                )
            })
        })
    }

    proptest! {
        #[test]
        fn fused_never_loses((c, k) in arb_costs()) {
            let g = build_kernel_graph(&c, k).unwrap();
            let seq = schedule_sequential(&g);
            let fused = schedule_fused(&g, 1.0).unwrap();
            prop_assert!(check_schedule(&g, &fused).is_ok());
            prop_assert!(check_schedule(&g, &seq).is_ok());
            prop_assert!(fused.makespan <= seq.makespan + 1e-9 * seq.makespan);
            prop_assert!((seq.makespan - (c.sta_total() + c.grad_total())).abs() <= 1e-9 * seq.makespan.max(1.0));
        }
    }
}
