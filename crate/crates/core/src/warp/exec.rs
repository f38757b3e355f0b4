// SPDX-License-Identifier: Apache-2.0

//! Executes a task assignment stage by stage.
//!
//! Within a stage every lane reads only values committed by earlier stages,
//! so warps are evaluated independently (in parallel when enabled) and their
//! results are committed in warp order afterwards. Root reductions use the
//! fixed pairing order over `y_dim` partials, which makes the output equal
//! bit for bit to the reference run with the same reduction order.

use crate::netlist::{Condition, NetRef};
use crate::par::{self, ExecMode};
use crate::sta::propagate::Analysis;
use crate::sta::rc::{self, ReductionOrder};
use crate::sta::{StaError, TimingState};

use super::cost::{cost_report, CostReport};
use super::{CostModel, KernelAssignment, TaskAssignment, WorkItem};

/// Deliberate defects for exercising mismatch detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Root-load reductions ignore the partial of this lane.
    DropReductionLane { lane: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecOptions {
    pub mode: ExecMode,
    pub fault: Option<Fault>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("coverage violation in {kernel} kernel: {detail}")]
    Coverage { kernel: String, detail: String },
    #[error(transparent)]
    Sta(#[from] StaError),
}

/// Checks that each kernel holds exactly the (member, condition) items of
/// its nets: every net for the RC kernel, the level's nets otherwise.
pub fn check_coverage(analysis: &Analysis<'_>, assignment: &TaskAssignment) -> Result<(), ExecError> {
    let design = analysis.design;
    let levels = &analysis.schedule.levels;
    if assignment.levels.len() != levels.len() {
        return Err(ExecError::Coverage {
            kernel: "level".into(),
            detail: format!("{} level kernels for {} levels", assignment.levels.len(), levels.len()),
        });
    }
    let mut base = Vec::with_capacity(design.nets.len() + 1);
    base.push(0usize);
    for n in &design.nets {
        base.push(base.last().unwrap() + n.members.len());
    }
    let all: Vec<NetRef> = (0..design.nets.len()).map(NetRef::new).collect();
    let mut expected = vec![false; design.nets.len()];
    let mut seen = vec![false; base[design.nets.len()] * 4];

    let mut check = |name: String, kernel: &KernelAssignment, nets: &[NetRef]| {
        let fail = |detail: String| {
            Err(ExecError::Coverage {
                kernel: name.clone(),
                detail,
            })
        };
        expected.iter_mut().for_each(|e| *e = false);
        seen.iter_mut().for_each(|s| *s = false);
        let mut want = 0;
        for &n in nets {
            expected[n.index()] = true;
            want += design.nets[n.index()].members.len() * 4;
        }
        let mut got = 0;
        for item in kernel.warps().flat_map(|w| w.items.iter()) {
            let n = item.net.index();
            if n >= design.nets.len() || !expected[n] {
                return fail(format!("net {n} does not belong to this kernel"));
            }
            let m = design.nets[n].members.len();
            if item.pos as usize >= m || item.cond >= 4 {
                return fail(format!("item ({n}, {}, {}) out of range", item.pos, item.cond));
            }
            let slot = (base[n] + item.pos as usize) * 4 + item.cond as usize;
            if seen[slot] {
                return fail(format!("item ({n}, {}, {}) assigned twice", item.pos, item.cond));
            }
            seen[slot] = true;
            got += 1;
        }
        if got != want {
            return fail(format!("{} of {} items assigned", got, want));
        }
        Ok(())
    };
    check("rc".into(), &assignment.rc, &all)?;
    for (l, (kernel, nets)) in assignment.levels.iter().zip(levels).enumerate() {
        check(format!("level {l}"), kernel, nets)?;
    }
    Ok(())
}

/// Evaluates `f` for every item of every warp and returns the results in
/// warp order, lanes in order within a warp.
fn run_stage<V, F>(mode: ExecMode, kernel: &KernelAssignment, f: F) -> Result<Vec<(WorkItem, V)>, StaError>
where
    V: Send,
    F: Fn(WorkItem) -> Result<V, StaError> + Sync + Send,
{
    let warps: Vec<_> = kernel.warps().collect();
    let per_warp = par::map(mode, &warps, |w| {
        w.items
            .iter()
            .map(|&item| f(item).map(|v| (item, v)))
            .collect::<Result<Vec<_>, _>>()
    });
    let mut out = Vec::new();
    for r in per_warp {
        out.extend(r?);
    }
    Ok(out)
}

fn kernel_nets(kernel: &KernelAssignment) -> impl Iterator<Item = NetRef> + '_ {
    kernel.blocks.iter().flat_map(|b| b.nets.iter().copied())
}

/// Runs every kernel of `assignment` and returns the timing state with the
/// cost of the schedule.
pub fn execute_scheduled(
    analysis: &Analysis<'_>,
    assignment: &TaskAssignment,
    model: &CostModel,
    options: &ExecOptions,
) -> Result<(TimingState, CostReport), ExecError> {
    check_coverage(analysis, assignment)?;
    let design = analysis.design;
    let trees = &analysis.index.trees;
    let mode = options.mode;
    let lanes = assignment.geometry.y_dim as usize;
    let mut state = analysis.new_state();

    let pin_of = |item: WorkItem| design.net(item.net).members[item.pos as usize].pin.index();

    // Loads: each lane evaluates its member's subtree in the reference order.
    fn subtree_load(net: &crate::netlist::NetTopology, tree: &crate::netlist::NetTree, pos: usize, c: usize) -> f64 {
        let mut acc = net.members[pos].cap.0[c];
        for &ch in &tree.children[pos] {
            acc += subtree_load(net, tree, ch as usize, c);
        }
        acc
    }
    let loads = run_stage(mode, &assignment.rc, |item| {
        let n = item.net.index();
        Ok(subtree_load(&design.nets[n], &trees[n], item.pos as usize, item.cond as usize))
    })?;
    for (item, v) in loads {
        state.load[pin_of(item)].0[item.cond as usize] = v;
    }

    let skip = options.fault.map(|Fault::DropReductionLane { lane }| lane);
    for net in kernel_nets(&assignment.rc) {
        let topo = design.net(net);
        let root = rc::root_load_with(
            topo,
            &trees[net.index()],
            |pos| state.load[topo.members[pos].pin.index()],
            ReductionOrder::Tree { lanes },
            skip,
        );
        state.load[topo.root.index()] = root;
    }

    // Delays: walk from the root down to the member, summing edge delays.
    let delays = run_stage(mode, &assignment.rc, |item| {
        let topo = design.net(item.net);
        let tree = &trees[item.net.index()];
        let c = item.cond as usize;
        let edge = |p: usize| topo.members[p].res.0[c] * state.load[topo.members[p].pin.index()].0[c];
        let mut path = vec![item.pos as usize];
        while let Some(p) = tree.parent[*path.last().unwrap()] {
            path.push(p as usize);
        }
        let mut acc = 0.0;
        for &p in path.iter().rev() {
            acc += edge(p);
        }
        Ok((edge(item.pos as usize), acc))
    })?;
    for (item, (e, d)) in delays {
        let i = pin_of(item);
        state.edge_delay[i].0[item.cond as usize] = e;
        state.net_delay[i].0[item.cond as usize] = d;
    }

    let impulses = run_stage(mode, &assignment.rc, |item| {
        let m = &design.net(item.net).members[item.pos as usize];
        let c = item.cond as usize;
        Ok(rc::impulse(m.res.0[c], m.cap.0[c], state.net_delay[m.pin.index()].0[c]))
    })?;
    for (item, v) in impulses {
        state.impulse[pin_of(item)].0[item.cond as usize] = v;
    }

    for (l, kernel) in assignment.levels.iter().enumerate() {
        for &net in &analysis.schedule.levels[l] {
            analysis.evaluate_driver(net, &mut state)?;
        }
        let sinks = run_stage(mode, kernel, |item| {
            let topo = design.net(item.net);
            let pin = topo.members[item.pos as usize].pin;
            Ok(Analysis::sink_timing(&state, topo.root, pin, item.cond as usize))
        })?;
        for (item, (at, slew)) in sinks {
            let i = pin_of(item);
            state.arrival[i].0[item.cond as usize] = at;
            state.slew[i].0[item.cond as usize] = slew;
        }
        for net in kernel_nets(kernel) {
            for m in &design.net(net).members {
                state.arrival_ready[m.pin.index()] = true;
            }
        }
    }

    for (l, kernel) in assignment.levels.iter().enumerate().rev() {
        let required = run_stage(mode, kernel, |item| {
            let pin = design.net(item.net).members[item.pos as usize].pin;
            analysis.pin_required(pin, Condition::from_index(item.cond as usize), &state)
        })?;
        for (item, r) in required {
            state.required[pin_of(item)].0[item.cond as usize] = r;
        }
        for net in kernel_nets(kernel) {
            for m in &design.net(net).members {
                state.required_ready[m.pin.index()] = true;
            }
        }
        for &net in &analysis.schedule.levels[l] {
            analysis.backward_root(net, &mut state)?;
        }
    }
    analysis.finish(&mut state)?;

    Ok((state, cost_report(assignment, model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{generate_design, FanoutDistribution, GeneratorConfig};
    use crate::sta::StaConfig;
    use crate::warp::{assign, Scheme, WarpGeometry};

    fn design(seed: u64) -> crate::netlist::Design {
        let mut cfg = GeneratorConfig::new(300, FanoutDistribution::PowerLaw { alpha: 2.0, max: 64 }, 6, seed);
        cfg.rc_tree_fraction = 0.5;
        generate_design(&cfg).unwrap()
    }

    fn same(a: &TimingState, b: &TimingState) -> bool {
        let bits = |v: &[crate::netlist::CornerVector]| -> Vec<u64> {
            v.iter().flat_map(|c| c.0.map(f64::to_bits)).collect()
        };
        [
            (&a.load, &b.load),
            (&a.net_delay, &b.net_delay),
            (&a.edge_delay, &b.edge_delay),
            (&a.impulse, &b.impulse),
            (&a.slew, &b.slew),
            (&a.arrival, &b.arrival),
            (&a.required, &b.required),
            (&a.slack, &b.slack),
        ]
        .iter()
        .all(|(x, y)| bits(x) == bits(y))
    }

    #[test]
    fn every_scheme_reproduces_the_reference_exactly() {
        for seed in [1, 2] {
            let d = design(seed);
            let a = Analysis::new(&d).unwrap();
            let reference = a
                .run(&StaConfig {
                    reduction: ReductionOrder::Tree { lanes: 8 },
                })
                .unwrap();
            for scheme in Scheme::ALL {
                let t = assign(&a, scheme, &WarpGeometry::default());
                for mode in [ExecMode::Sequential, ExecMode::Parallel] {
                    let opts = ExecOptions { mode, fault: None };
                    let (state, _) = execute_scheduled(&a, &t, &CostModel::default(), &opts).unwrap();
                    assert!(same(&state, &reference), "{scheme:?} {mode:?} seed {seed}");
                }
            }
        }
    }

    #[test]
    fn dropped_lane_changes_root_loads() {
        let d = design(3);
        let a = Analysis::new(&d).unwrap();
        let t = assign(&a, Scheme::PinBased, &WarpGeometry::default());
        let opts = ExecOptions {
            mode: ExecMode::Sequential,
            fault: Some(Fault::DropReductionLane { lane: 0 }),
        };
        let (faulty, _) = execute_scheduled(&a, &t, &CostModel::default(), &opts).unwrap();
        let (good, _) = execute_scheduled(&a, &t, &CostModel::default(), &ExecOptions::default()).unwrap();
        assert!(faulty.load != good.load);
    }

    #[test]
    fn duplicated_or_missing_items_are_rejected() {
        let d = design(4);
        let a = Analysis::new(&d).unwrap();
        let t = assign(&a, Scheme::Cte, &WarpGeometry::default());
        let run = |t: &TaskAssignment| execute_scheduled(&a, t, &CostModel::default(), &ExecOptions::default());

        let mut dup = t.clone();
        let w = &mut dup.rc.blocks[0].warps[0];
        let first = w.items[0];
        w.items.push(first);
        *w.lane_offsets.last_mut().unwrap() += 1;
        assert!(matches!(run(&dup), Err(ExecError::Coverage { .. })));

        let mut missing = t.clone();
        let w = &mut missing.levels[0].blocks[0].warps[0];
        w.items.pop();
        *w.lane_offsets.last_mut().unwrap() -= 1;
        assert!(matches!(run(&missing), Err(ExecError::Coverage { .. })));

        let mut wrong_level = t.clone();
        let moved = wrong_level.levels[1].blocks.remove(0);
        wrong_level.levels[0].blocks.push(moved);
        assert!(matches!(run(&wrong_level), Err(ExecError::Coverage { .. })));
    }
}
