// SPDX-License-Identifier: Apache-2.0

//! Reference static timing analysis.
//!
//! The pass order is: RC quantities for every net, forward arrival
//! propagation level by level, then backward required-time propagation in
//! reverse level order. Everything runs sequentially in a fixed order so the
//! results serve as the oracle for scheduled execution.

pub mod levelize;
pub mod lut;
pub mod propagate;
pub mod rc;
pub mod report;

use crate::netlist::{Condition, CornerVector, Design, DesignIndex, Edge, NetTreeError, PinRef, Violation};

pub use levelize::{check_schedule, levelize, LevelSchedule, LevelizeError};
pub use lut::interpolate_lut;
pub use propagate::{Analysis, StaConfig};
pub use rc::{
    compute_net_delays, compute_net_impulses, compute_net_loads, compute_net_rc, NetRc,
    ReductionOrder,
};
pub use report::{PinRecord, ReportSummary, TimingReport};

#[derive(Debug, thiserror::Error)]
pub enum StaError {
    #[error("invalid design: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Levelize(#[from] LevelizeError),
    #[error(transparent)]
    Tree(#[from] NetTreeError),
    #[error("schedule violation: {stage} pass read pin {} before it was computed", .pin.0)]
    ScheduleViolation { stage: &'static str, pin: PinRef },
}

/// Per-pin timing values, indexed by pin; `arc_delay` is indexed by arc.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingState {
    /// Downstream capacitance: root load for net roots, subtree load for members.
    pub load: Vec<CornerVector>,
    /// Cumulative RC delay from the net root.
    pub net_delay: Vec<CornerVector>,
    /// Delay of the single edge into the pin.
    pub edge_delay: Vec<CornerVector>,
    pub impulse: Vec<CornerVector>,
    pub slew: Vec<CornerVector>,
    pub arrival: Vec<CornerVector>,
    pub required: Vec<CornerVector>,
    pub slack: Vec<CornerVector>,
    pub arc_delay: Vec<CornerVector>,
    pub(crate) arrival_ready: Vec<bool>,
    pub(crate) required_ready: Vec<bool>,
}

impl TimingState {
    pub fn new(num_pins: usize, num_arcs: usize) -> Self {
        let nan = CornerVector::splat(f64::NAN);
        Self {
            load: vec![CornerVector::ZERO; num_pins],
            net_delay: vec![CornerVector::ZERO; num_pins],
            edge_delay: vec![CornerVector::ZERO; num_pins],
            impulse: vec![CornerVector::ZERO; num_pins],
            slew: vec![nan; num_pins],
            arrival: vec![nan; num_pins],
            required: vec![nan; num_pins],
            slack: vec![nan; num_pins],
            arc_delay: vec![nan; num_arcs],
            arrival_ready: vec![false; num_pins],
            required_ready: vec![false; num_pins],
        }
    }

    pub fn num_pins(&self) -> usize {
        self.load.len()
    }

    /// Equality of every value bit for bit (NaN equals NaN of the same bits).
    pub fn bit_identical(&self, other: &Self) -> bool {
        let fields = |s: &Self| {
            [
                &s.load,
                &s.net_delay,
                &s.edge_delay,
                &s.impulse,
                &s.slew,
                &s.arrival,
                &s.required,
                &s.slack,
                &s.arc_delay,
            ]
            .map(|v| v.iter().flat_map(|c| c.0).map(f64::to_bits).collect::<Vec<_>>())
        };
        fields(self) == fields(other)
    }
}

/// Total negative late slack at endpoints, split by edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tns {
    pub rise: f64,
    pub fall: f64,
    pub total: f64,
}

pub fn tns(design: &Design, state: &TimingState) -> Tns {
    let mut by_edge = [0.0f64; 2];
    for pin in design.endpoints() {
        for edge in Edge::ALL {
            let s = state.slack[pin.index()][Condition::late(edge)];
            by_edge[edge.index()] += s.min(0.0);
        }
    }
    Tns {
        rise: by_edge[0],
        fall: by_edge[1],
        total: by_edge[0] + by_edge[1],
    }
}

/// Worst late slack over endpoints (infinite when there are none).
pub fn wns(design: &Design, state: &TimingState) -> f64 {
    design
        .endpoints()
        .flat_map(|p| Condition::LATE.map(|c| state.slack[p.index()][c]))
        .fold(f64::INFINITY, f64::min)
}

/// Validates, indexes and levelizes `design`, then runs the reference passes.
pub fn run_reference<'d>(
    design: &'d Design,
    config: &StaConfig,
) -> Result<(Analysis<'d>, TimingState), StaError> {
    let analysis = Analysis::new(design)?;
    let state = analysis.run(config)?;
    Ok((analysis, state))
}

pub(crate) fn index_design(design: &Design) -> Result<DesignIndex, StaError> {
    let violations = crate::netlist::validate(design);
    if !violations.is_empty() {
        return Err(StaError::Invalid(violations));
    }
    Ok(DesignIndex::new(design)?)
}
