// SPDX-License-Identifier: Apache-2.0

//! Differentiable timing: log-sum-exp arrival propagation over late
//! conditions and reverse-mode gradients of a total-negative-slack loss with
//! respect to arc delays and net edge delays.

pub mod check;
pub mod dd;
pub mod lse;
pub mod smooth;

use serde::{Deserialize, Serialize};

use crate::netlist::{ArcRef, Design, Edge, PinRef};

pub use check::{finite_diff_check, finite_diff_check_at, FdReport};
pub use dd::{DoubleDouble, Real};
pub use lse::{lse, lse_grad, LseConfig, LseError};
pub use smooth::{
    backward_grad_level, backward_tns_grad, begin_backward, finish_backward, forward_lse_arrival,
    forward_lse_level, forward_lse_level_with, late_pair, run_gradient,
};

/// Outer clamp applied to each endpoint violation `v = arrival - required`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `max(0, v)`.
    #[default]
    Hinge,
    /// `gamma * ln(1 + exp(v / gamma))`.
    Softplus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradConfig {
    pub gamma: f64,
    pub loss: LossKind,
}

impl GradConfig {
    /// Smoothness of one percent of the clock period with the hinge loss.
    pub fn for_design(design: &Design) -> Self {
        Self {
            gamma: 0.01 * design.clock_period,
            loss: LossKind::Hinge,
        }
    }

    pub fn lse(&self) -> LseConfig {
        LseConfig { gamma: self.gamma }
    }
}

/// A delay variable of the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coordinate {
    /// Late delay of a timing arc.
    Arc { arc: usize, edge: usize },
    /// Late delay of the net edge into a member pin.
    NetEdge { pin: usize, edge: usize },
}

impl Coordinate {
    pub fn edge(self) -> Edge {
        let e = match self {
            Coordinate::Arc { edge, .. } | Coordinate::NetEdge { edge, .. } => edge,
        };
        Edge::ALL[e]
    }
}

/// Smooth arrivals, softmax weights and gradients. Per-pin and per-arc
/// arrays hold `[rise, fall]` pairs for the late conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientState {
    pub config: GradConfig,
    /// Smoothed loss in seconds (the negated smooth TNS).
    pub loss: f64,
    pub lse_arrival: Vec<[f64; 2]>,
    /// Softmax weight of each arc at its output pin's merge.
    pub arc_weight: Vec<[f64; 2]>,
    /// Sensitivity of the loss to each pin's smooth arrival.
    pub pin_grad: Vec<[f64; 2]>,
    pub arc_grad: Vec<[f64; 2]>,
    /// Sensitivity to the edge delay into each member pin (zero elsewhere).
    pub edge_grad: Vec<[f64; 2]>,
    #[serde(skip)]
    pub(crate) forward_ready: Vec<bool>,
    #[serde(skip)]
    pub(crate) backward_ready: Vec<bool>,
}

impl GradientState {
    pub fn new(design: &Design, config: GradConfig) -> Self {
        let pins = design.pins.len();
        let arcs = design.arcs.len();
        let nan = [f64::NAN; 2];
        let mut g = Self {
            config,
            loss: f64::NAN,
            lse_arrival: vec![nan; pins],
            arc_weight: vec![nan; arcs],
            pin_grad: vec![nan; pins],
            arc_grad: vec![nan; arcs],
            edge_grad: vec![[0.0; 2]; pins],
            forward_ready: vec![false; pins],
            backward_ready: vec![false; pins],
        };
        for (pin, arrival) in design.primary_inputs() {
            g.lse_arrival[pin.index()] = smooth::late_pair(arrival);
            g.forward_ready[pin.index()] = true;
        }
        g
    }

    /// Every delay variable in a fixed order: arcs, then member edges.
    pub fn coordinates(design: &Design) -> Vec<Coordinate> {
        let arcs = (0..design.arcs.len()).flat_map(|arc| (0..2).map(move |edge| Coordinate::Arc { arc, edge }));
        let edges = design
            .nets
            .iter()
            .flat_map(|n| n.members.iter())
            .flat_map(|m| (0..2).map(move |edge| Coordinate::NetEdge { pin: m.pin.index(), edge }));
        arcs.chain(edges).collect()
    }

    pub fn gradient(&self, c: Coordinate) -> f64 {
        match c {
            Coordinate::Arc { arc, edge } => self.arc_grad[arc][edge],
            Coordinate::NetEdge { pin, edge } => self.edge_grad[pin][edge],
        }
    }

    /// Coordinate with the largest gradient magnitude.
    pub fn max_gradient(&self, design: &Design) -> Option<(Coordinate, f64)> {
        Self::coordinates(design)
            .into_iter()
            .map(|c| (c, self.gradient(c)))
            .fold(None, |best, (c, g)| match best {
                Some((_, b)) if f64::abs(b) >= g.abs() => best,
                _ => Some((c, g)),
            })
    }

    /// Equality of every value bit for bit.
    pub fn bit_identical(&self, other: &Self) -> bool {
        let fields = |s: &Self| {
            [&s.lse_arrival, &s.arc_weight, &s.pin_grad, &s.arc_grad, &s.edge_grad]
                .map(|v| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>())
        };
        self.loss.to_bits() == other.loss.to_bits() && fields(self) == fields(other)
    }

    pub fn arc_gradient(&self, arc: ArcRef, edge: Edge) -> f64 {
        self.arc_grad[arc.index()][edge.index()]
    }

    pub fn edge_gradient(&self, pin: PinRef, edge: Edge) -> f64 {
        self.edge_grad[pin.index()][edge.index()]
    }
}
