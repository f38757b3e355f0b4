// SPDX-License-Identifier: Apache-2.0

//! Lockstep warp execution model.
//!
//! A scheme maps every (net, member, condition) work item of a kernel onto
//! lanes of simulated warps. Executing an assignment computes the same
//! timing values as the reference engine, while the cost model charges each
//! warp the trip count of its busiest lane plus scheme-specific overhead
//! (reductions, prefix scans, prefix searches).

pub mod assign;
pub mod compare;
pub mod cost;
pub mod exec;
pub mod scan;

use serde::{Deserialize, Serialize};

use crate::netlist::NetRef;

pub use assign::{assign, assign_cte, assign_net_based, assign_pin_based};
pub use compare::{compare_schemes, compare_schemes_with, compare_states, VALUE_TOLERANCE, Comparison, SchemeRun, StateDiff};
pub use cost::{cost_report, CostReport, KernelCost, KernelKind, StageCost, Stages};
pub use exec::{execute_scheduled, ExecError, ExecOptions, Fault};
pub use scan::{exclusive_scan, lower_bound, tree_reduce};

/// How the net-based scheme spreads the four conditions of a net.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMode {
    /// One lane per net, conditions processed in sequence.
    #[default]
    Serial,
    /// Four lanes per net, one condition each.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpGeometry {
    pub warp_size: u32,
    /// Lanes per pin, one per condition.
    pub x_dim: u32,
    /// Lanes striding over the members of a net.
    pub y_dim: u32,
    /// Nets (one warp each) per pin-based block.
    pub nets_per_block: u32,
    /// Nets and threads per CTE block.
    pub cte_block_size: u32,
    pub net_conditions: ConditionMode,
}

impl Default for WarpGeometry {
    fn default() -> Self {
        Self {
            warp_size: 32,
            x_dim: 4,
            y_dim: 8,
            nets_per_block: 4,
            cte_block_size: 32,
            net_conditions: ConditionMode::Serial,
        }
    }
}

impl WarpGeometry {
    pub fn validate(&self) -> Result<(), String> {
        if !self.warp_size.is_power_of_two() {
            return Err(format!("warp size {} is not a power of two", self.warp_size));
        }
        if self.x_dim != 4 {
            return Err("x_dim must be 4 (one lane per condition)".into());
        }
        if self.x_dim * self.y_dim != self.warp_size {
            return Err(format!(
                "x_dim * y_dim = {} differs from warp size {}",
                self.x_dim * self.y_dim,
                self.warp_size
            ));
        }
        if self.nets_per_block == 0 || self.cte_block_size == 0 {
            return Err("block sizes must be positive".into());
        }
        Ok(())
    }
}

/// Abstract cycle charges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub cycles_per_item: u64,
    pub scan_step_cost: u64,
    pub search_step_cost: u64,
    pub reduction_step_cost: u64,
    pub kernel_launch_cost: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            cycles_per_item: 1,
            scan_step_cost: 1,
            search_step_cost: 1,
            reduction_step_cost: 1,
            kernel_launch_cost: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "net-based")]
    NetBased,
    #[serde(rename = "pin-based")]
    PinBased,
    #[serde(rename = "cte")]
    Cte,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::NetBased, Scheme::PinBased, Scheme::Cte];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::NetBased => "net-based",
            Scheme::PinBased => "pin-based",
            Scheme::Cte => "cte",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// One member pin under one condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkItem {
    pub net: NetRef,
    /// Member position within the net.
    pub pos: u32,
    /// Condition index in canonical order.
    pub cond: u8,
}

/// Per-lane item sequences stored contiguously.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Warp {
    /// `lane_offsets[k]..lane_offsets[k + 1]` indexes `items` for lane `k`.
    pub lane_offsets: Vec<u32>,
    pub items: Vec<WorkItem>,
}

impl Warp {
    pub fn from_lanes(lanes: Vec<Vec<WorkItem>>) -> Self {
        let mut lane_offsets = Vec::with_capacity(lanes.len() + 1);
        let mut items = Vec::with_capacity(lanes.iter().map(Vec::len).sum());
        lane_offsets.push(0);
        for lane in lanes {
            items.extend(lane);
            lane_offsets.push(items.len() as u32);
        }
        Self {
            lane_offsets,
            items,
        }
    }

    pub fn num_lanes(&self) -> usize {
        self.lane_offsets.len() - 1
    }

    pub fn lane(&self, k: usize) -> &[WorkItem] {
        &self.items[self.lane_offsets[k] as usize..self.lane_offsets[k + 1] as usize]
    }

    /// Loop trips of the busiest lane.
    pub fn trips(&self) -> u64 {
        self.lane_offsets
            .windows(2)
            .map(|w| u64::from(w[1] - w[0]))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    pub nets: Vec<NetRef>,
    pub warps: Vec<Warp>,
    /// Prefix scan steps charged once per kernel (CTE).
    pub scan_steps: u32,
    /// Steps of one prefix search (CTE).
    pub search_steps: u32,
    /// Exclusive workload prefix followed by the block total (CTE).
    pub prefix: Vec<u64>,
}

/// Blocks launched by one kernel.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KernelAssignment {
    pub blocks: Vec<Block>,
}

impl KernelAssignment {
    pub fn warps(&self) -> impl Iterator<Item = &Warp> {
        self.blocks.iter().flat_map(|b| b.warps.iter())
    }

    pub fn num_items(&self) -> usize {
        self.warps().map(|w| w.items.len()).sum()
    }
}

/// Work mapping for the RC kernel (all nets) and one kernel per level; the
/// forward and backward kernels of a level share its mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskAssignment {
    pub scheme: Scheme,
    pub geometry: WarpGeometry,
    pub rc: KernelAssignment,
    pub levels: Vec<KernelAssignment>,
    /// Scan steps plus lockstep search steps for one pass over every kernel.
    pub rescheduling_steps: u64,
}

impl TaskAssignment {
    pub fn kernels(&self) -> impl Iterator<Item = &KernelAssignment> {
        std::iter::once(&self.rc).chain(self.levels.iter())
    }
}
