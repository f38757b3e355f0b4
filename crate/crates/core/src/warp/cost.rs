// SPDX-License-Identifier: Apache-2.0

//! Lockstep cycle accounting for a task assignment.
//!
//! Warps run serially; a warp pays the trip count of its busiest lane for
//! every item stage. Overhead covers root reductions, and for CTE the block
//! prefix scan once per kernel plus one prefix search per trip and stage.

use serde::{Deserialize, Serialize};

use super::scan::reduction_steps;
use super::{Block, CostModel, KernelAssignment, Scheme, TaskAssignment, Warp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    /// Sum over warps of busiest-lane trips times `cycles_per_item`.
    pub work_cycles: u64,
    pub overhead_cycles: u64,
    /// Items actually executed times `cycles_per_item`.
    pub useful_lane_cycles: u64,
}

impl StageCost {
    pub fn total(&self) -> u64 {
        self.work_cycles + self.overhead_cycles
    }

    fn add(&mut self, other: &StageCost) {
        self.work_cycles += other.work_cycles;
        self.overhead_cycles += other.overhead_cycles;
        self.useful_lane_cycles += other.useful_lane_cycles;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub loads: StageCost,
    /// Root-load and root-required reductions.
    pub reduction: StageCost,
    pub delays: StageCost,
    pub impulses: StageCost,
    pub forward: StageCost,
    pub backward: StageCost,
}

impl Stages {
    pub const NAMES: [&'static str; 6] = ["loads", "reduction", "delays", "impulses", "forward", "backward"];

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &StageCost)> {
        Self::NAMES.into_iter().zip([
            &self.loads,
            &self.reduction,
            &self.delays,
            &self.impulses,
            &self.forward,
            &self.backward,
        ])
    }

    pub fn sum(&self) -> StageCost {
        let mut s = StageCost::default();
        for (_, c) in self.iter() {
            s.add(c);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rc,
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelCost {
    pub kind: KernelKind,
    /// Level of forward and backward kernels.
    pub level: Option<usize>,
    /// Stage cycles plus the launch cost.
    pub cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub scheme: Scheme,
    pub warp_size: u32,
    pub total_cycles: u64,
    pub work_cycles: u64,
    pub overhead_cycles: u64,
    pub launch_cycles: u64,
    pub useful_lane_cycles: u64,
    pub warps_launched: u64,
    /// Useful lane cycles over lane cycles spent in item stages.
    pub lane_utilization: f64,
    /// Useful lane cycles over all lane cycles, overhead included.
    pub issue_efficiency: f64,
    pub rescheduling_steps: u64,
    pub stages: Stages,
    pub kernels: Vec<KernelCost>,
}

struct Charger<'a> {
    scheme: Scheme,
    model: &'a CostModel,
    reduction_lanes: usize,
}

impl Charger<'_> {
    fn items(&self, block: &Block, warp: &Warp, stage: &mut StageCost) {
        let trips = warp.trips();
        stage.work_cycles += trips * self.model.cycles_per_item;
        stage.useful_lane_cycles += warp.items.len() as u64 * self.model.cycles_per_item;
        if self.scheme == Scheme::Cte {
            stage.overhead_cycles += trips * u64::from(block.search_steps) * self.model.search_step_cost;
        }
    }

    fn scan(&self, block: &Block, stage: &mut StageCost) {
        if self.scheme == Scheme::Cte {
            stage.overhead_cycles += u64::from(block.scan_steps) * self.model.scan_step_cost;
        }
    }

    fn reduction(&self, stage: &mut StageCost) {
        if self.scheme != Scheme::NetBased {
            stage.overhead_cycles +=
                u64::from(reduction_steps(self.reduction_lanes)) * self.model.reduction_step_cost;
        }
    }

    /// Charges every warp of `kernel` for `item_stages`, optionally followed
    /// by a root reduction, and returns the kernel's stage cycles.
    fn kernel(&self, kernel: &KernelAssignment, item_stages: &mut [&mut StageCost], reduction: Option<&mut StageCost>) -> u64 {
        let before: u64 = item_stages.iter().map(|s| s.total()).sum();
        let mut red = StageCost::default();
        for block in &kernel.blocks {
            for warp in &block.warps {
                self.scan(block, item_stages[0]);
                for stage in item_stages.iter_mut() {
                    self.items(block, warp, stage);
                }
                if reduction.is_some() {
                    self.reduction(&mut red);
                }
            }
        }
        let after: u64 = item_stages.iter().map(|s| s.total()).sum();
        if let Some(r) = reduction {
            r.add(&red);
        }
        after - before + red.total()
    }
}

/// Cycle report for one pass of every kernel in `assignment`.
pub fn cost_report(assignment: &TaskAssignment, model: &CostModel) -> CostReport {
    let geometry = &assignment.geometry;
    let charger = Charger {
        scheme: assignment.scheme,
        model,
        reduction_lanes: match assignment.scheme {
            Scheme::Cte => geometry.cte_block_size as usize,
            _ => geometry.y_dim as usize,
        },
    };
    let mut s = Stages::default();
    let mut kernels = Vec::with_capacity(1 + 2 * assignment.levels.len());

    let rc = charger.kernel(
        &assignment.rc,
        &mut [&mut s.loads, &mut s.delays, &mut s.impulses],
        Some(&mut s.reduction),
    );
    kernels.push(KernelCost {
        kind: KernelKind::Rc,
        level: None,
        cycles: rc + model.kernel_launch_cost,
    });
    for (level, k) in assignment.levels.iter().enumerate() {
        let cycles = charger.kernel(k, &mut [&mut s.forward], None);
        kernels.push(KernelCost {
            kind: KernelKind::Forward,
            level: Some(level),
            cycles: cycles + model.kernel_launch_cost,
        });
    }
    for (level, k) in assignment.levels.iter().enumerate().rev() {
        let cycles = charger.kernel(k, &mut [&mut s.backward], Some(&mut s.reduction));
        kernels.push(KernelCost {
            kind: KernelKind::Backward,
            level: Some(level),
            cycles: cycles + model.kernel_launch_cost,
        });
    }

    let sum = s.sum();
    let launch_cycles = kernels.len() as u64 * model.kernel_launch_cost;
    let total_cycles = sum.total() + launch_cycles;
    let ws = u64::from(geometry.warp_size);
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    CostReport {
        scheme: assignment.scheme,
        warp_size: geometry.warp_size,
        total_cycles,
        work_cycles: sum.work_cycles,
        overhead_cycles: sum.overhead_cycles,
        launch_cycles,
        useful_lane_cycles: sum.useful_lane_cycles,
        warps_launched: assignment.kernels().map(|k| k.warps().count() as u64).sum(),
        lane_utilization: ratio(sum.useful_lane_cycles, sum.work_cycles * ws),
        issue_efficiency: ratio(sum.useful_lane_cycles, total_cycles * ws),
        rescheduling_steps: assignment.rescheduling_steps,
        stages: s,
        kernels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CornerVector, Design, DesignBuilder};
    use crate::sta::Analysis;
    use crate::warp::{assign, WarpGeometry};

    fn stars(sizes: &[usize]) -> Design {
        let mut b = DesignBuilder::new(1.0);
        for (i, &m) in sizes.iter().enumerate() {
            let root = b.input(format!("i{i}"), CornerVector::ZERO);
            let sinks: Vec<_> = (0..m).map(|j| b.endpoint(format!("o{i}_{j}"))).collect();
            b.star(root, &sinks, 1.0, 1.0);
        }
        b.finish()
    }

    fn report(sizes: &[usize], scheme: Scheme) -> CostReport {
        let d = stars(sizes);
        let a = Analysis::new(&d).unwrap();
        cost_report(&assign(&a, scheme, &WarpGeometry::default()), &CostModel::default())
    }

    #[test]
    fn balanced_net_based_load_stage_is_fully_utilized() {
        let r = report(&[1; 32], Scheme::NetBased);
        assert_eq!(r.stages.loads.work_cycles, 4);
        assert_eq!(r.stages.loads.useful_lane_cycles, 128);
        assert_eq!(r.lane_utilization, 1.0);
    }

    #[test]
    fn one_long_net_stalls_the_warp() {
        let mut sizes = vec![33];
        sizes.extend([1; 31]);
        let r = report(&sizes, Scheme::NetBased);
        let loads = r.stages.loads;
        assert_eq!(loads.work_cycles, 33 * 4);
        assert_eq!(loads.useful_lane_cycles, (33 + 31) * 4);
        let util = loads.useful_lane_cycles as f64 / (loads.work_cycles * 32) as f64;
        assert!((util - 64.0 / (33.0 * 32.0)).abs() < 1e-15);

        let pin = report(&sizes, Scheme::PinBased);
        assert!(pin.total_cycles < r.total_cycles);
        // 5 trips for the long net plus 31 single-trip warps, per item stage.
        assert_eq!(pin.stages.loads.work_cycles, 5 + 31);
    }

    #[test]
    fn useful_work_is_scheme_independent() {
        let sizes = [5, 0, 17, 1, 64, 3, 3, 9, 40, 2];
        let reports: Vec<_> = Scheme::ALL.iter().map(|&s| report(&sizes, s)).collect();
        let items: u64 = sizes.iter().map(|&m| m as u64 * 4).sum();
        for r in &reports {
            // Loads, delays, impulses, forward and backward stages.
            assert_eq!(r.useful_lane_cycles, 5 * items);
            assert!(r.lane_utilization <= 1.0 && r.lane_utilization > 0.0);
            assert!(r.total_cycles >= 5 * items.div_ceil(32));
            let kernel_sum: u64 = r.kernels.iter().map(|k| k.cycles).sum();
            assert_eq!(kernel_sum, r.total_cycles);
        }
    }

    #[test]
    fn cte_charges_scan_and_search() {
        let r = report(&[2, 1, 3, 0], Scheme::Cte);
        // One block of 4 nets: scan 2*log2(4) = 4 steps per kernel, one trip
        // with a 3-step search (prefix of 5 entries) per item stage.
        assert_eq!(r.stages.loads.overhead_cycles, 4 + 3);
        assert_eq!(r.stages.delays.overhead_cycles, 3);
        assert_eq!(r.stages.loads.work_cycles, 1);
    }

    #[test]
    fn launch_cost_is_per_kernel() {
        let d = stars(&[3, 4]);
        let a = Analysis::new(&d).unwrap();
        let t = assign(&a, Scheme::PinBased, &WarpGeometry::default());
        let base = cost_report(&t, &CostModel::default());
        let model = CostModel {
            kernel_launch_cost: 10,
            ..CostModel::default()
        };
        let launched = cost_report(&t, &model);
        assert_eq!(launched.kernels.len(), 3);
        assert_eq!(launched.total_cycles, base.total_cycles + 30);
    }
}
