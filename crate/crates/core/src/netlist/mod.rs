// SPDX-License-Identifier: Apache-2.0

//! Circuit data model: pins, cells with LUT-characterized arcs, rooted RC-tree
//! nets and timing constraints.
//!
//! A [`Design`] is immutable once built. Every cross reference is an index
//! newtype ([`PinRef`], [`NetRef`], ...) into the design's arrays. Derived
//! connectivity (which net a pin belongs to, fanin/fanout arcs, per-net child
//! lists) lives in [`DesignIndex`], built once per design.

pub mod builder;
pub mod csr;
pub mod format;
pub mod generate;
pub mod validate;

use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

pub use builder::DesignBuilder;
pub use csr::{build_csr, CsrNetlist};
pub use format::{parse_design, serialize_design, FormatError};
pub use generate::{generate_design, FanoutDistribution, GeneratorConfig, GeneratorError, DEFAULT_LUT_GRID_SIZE};
pub use validate::{validate, Violation};

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn new(index: usize) -> Self {
                Self(u32::try_from(index).expect("index exceeds u32 range"))
            }

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_newtype!(
    /// Index of a pin in [`Design::pins`].
    PinRef
);
index_newtype!(
    /// Index of a net in [`Design::nets`].
    NetRef
);
index_newtype!(
    /// Index of a cell in [`Design::cells`].
    CellRef
);
index_newtype!(
    /// Index of a level in a level schedule.
    LevelRef
);
index_newtype!(
    /// Index of a timing arc in [`Design::arcs`].
    ArcRef
);
index_newtype!(
    /// Index of a lookup table in [`Design::luts`].
    LutRef
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Early,
    Late,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Rise,
    Fall,
}

impl Edge {
    pub const ALL: [Edge; 2] = [Edge::Rise, Edge::Fall];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Edge::Rise => 0,
            Edge::Fall => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Rise => "rise",
            Edge::Fall => "fall",
        }
    }
}

/// One of the four analysis conditions, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    EarlyRise,
    EarlyFall,
    LateRise,
    LateFall,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::EarlyRise,
        Condition::EarlyFall,
        Condition::LateRise,
        Condition::LateFall,
    ];
    pub const LATE: [Condition; 2] = [Condition::LateRise, Condition::LateFall];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Condition {
        Self::ALL[index]
    }

    #[inline]
    pub fn mode(self) -> Mode {
        match self {
            Condition::EarlyRise | Condition::EarlyFall => Mode::Early,
            Condition::LateRise | Condition::LateFall => Mode::Late,
        }
    }

    #[inline]
    pub fn edge(self) -> Edge {
        match self {
            Condition::EarlyRise | Condition::LateRise => Edge::Rise,
            Condition::EarlyFall | Condition::LateFall => Edge::Fall,
        }
    }

    pub fn late(edge: Edge) -> Condition {
        match edge {
            Edge::Rise => Condition::LateRise,
            Edge::Fall => Condition::LateFall,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::EarlyRise => "early-rise",
            Condition::EarlyFall => "early-fall",
            Condition::LateRise => "late-rise",
            Condition::LateFall => "late-fall",
        }
    }
}

/// Four values indexed by [`Condition`].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CornerVector(pub [f64; 4]);

impl CornerVector {
    pub const ZERO: CornerVector = CornerVector([0.0; 4]);

    pub fn splat(value: f64) -> Self {
        Self([value; 4])
    }

    /// Same value for early and late, distinct rise and fall.
    pub fn rise_fall(rise: f64, fall: f64) -> Self {
        Self([rise, fall, rise, fall])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }
}

impl Index<Condition> for CornerVector {
    type Output = f64;

    #[inline]
    fn index(&self, cond: Condition) -> &f64 {
        &self.0[cond.index()]
    }
}

impl IndexMut<Condition> for CornerVector {
    #[inline]
    fn index_mut(&mut self, cond: Condition) -> &mut f64 {
        &mut self.0[cond.index()]
    }
}

/// Two-dimensional characterization table indexed by input slew (rows) and
/// output load (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lut2D {
    pub slew_axis: Vec<f64>,
    pub load_axis: Vec<f64>,
    pub table: Vec<Vec<f64>>,
}

impl Lut2D {
    /// A 1x1 table that evaluates to `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self {
            slew_axis: vec![0.0],
            load_axis: vec![0.0],
            table: vec![vec![value]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pin {
    pub name: String,
    pub is_endpoint: bool,
    /// Endpoint requirement. Defaults to early 0 / late clock period.
    pub required: Option<CornerVector>,
    /// Injected arrival; a pin carrying one is a primary input.
    pub arrival: Option<CornerVector>,
    /// Injected transition at a primary input (zero when absent).
    pub slew: Option<CornerVector>,
}

impl Pin {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            is_endpoint: false,
            required: None,
            arrival: None,
            slew: None,
        }
    }

    pub fn is_primary_input(&self) -> bool {
        self.arrival.is_some()
    }
}

/// Positive-unate input-to-output arc of a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingArc {
    pub cell: CellRef,
    pub from: PinRef,
    pub to: PinRef,
    pub delay_lut: [LutRef; 4],
    pub slew_lut: [LutRef; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub name: String,
    pub arcs: Vec<ArcRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetMember {
    pub pin: PinRef,
    /// Root or an earlier member of the same net.
    pub parent: PinRef,
    /// Resistance of the edge parent -> pin.
    pub res: CornerVector,
    pub cap: CornerVector,
}

/// A rooted RC tree. Members are listed in topological order.
#[derive(Clone, Debug, PartialEq)]
pub struct NetTopology {
    pub root: PinRef,
    pub root_cap: CornerVector,
    pub members: Vec<NetMember>,
}

impl NetTopology {
    /// Member positions grouped by parent. Fails on parents that are neither
    /// the root nor an earlier member.
    pub fn tree(&self) -> Result<NetTree, NetTreeError> {
        NetTree::build(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NetTreeError {
    #[error("member {position} has a parent that is not the root or an earlier member")]
    BadParent { position: usize },
}

/// Child lists of a net, in member-position order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetTree {
    pub root_children: Vec<u32>,
    pub children: Vec<Vec<u32>>,
    /// Parent position per member; `None` for children of the root.
    pub parent: Vec<Option<u32>>,
}

impl NetTree {
    pub fn build(net: &NetTopology) -> Result<Self, NetTreeError> {
        let n = net.members.len();
        let mut tree = NetTree {
            root_children: Vec::new(),
            children: vec![Vec::new(); n],
            parent: vec![None; n],
        };
        let mut seen: HashMap<PinRef, u32> = HashMap::with_capacity(n);
        for (pos, member) in net.members.iter().enumerate() {
            if member.parent == net.root {
                tree.root_children.push(pos as u32);
            } else {
                let parent_pos = *seen
                    .get(&member.parent)
                    .ok_or(NetTreeError::BadParent { position: pos })?;
                tree.children[parent_pos as usize].push(pos as u32);
                tree.parent[pos] = Some(parent_pos);
            }
            seen.entry(member.pin).or_insert(pos as u32);
        }
        Ok(tree)
    }

    pub fn is_child_of_root(&self, position: usize) -> bool {
        self.parent[position].is_none()
    }
}

/// A complete design.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub clock_period: f64,
    pub pins: Vec<Pin>,
    pub cells: Vec<Cell>,
    pub arcs: Vec<TimingArc>,
    pub nets: Vec<NetTopology>,
    pub luts: Vec<Lut2D>,
}

impl Design {
    pub fn empty(clock_period: f64) -> Self {
        Self {
            clock_period,
            pins: Vec::new(),
            cells: Vec::new(),
            arcs: Vec::new(),
            nets: Vec::new(),
            luts: Vec::new(),
        }
    }

    pub fn pin(&self, pin: PinRef) -> &Pin {
        &self.pins[pin.index()]
    }

    pub fn net(&self, net: NetRef) -> &NetTopology {
        &self.nets[net.index()]
    }

    pub fn arc(&self, arc: ArcRef) -> &TimingArc {
        &self.arcs[arc.index()]
    }

    pub fn lut(&self, lut: LutRef) -> &Lut2D {
        &self.luts[lut.index()]
    }

    pub fn primary_inputs(&self) -> impl Iterator<Item = (PinRef, CornerVector)> + '_ {
        self.pins
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.arrival.map(|a| (PinRef::new(i), a)))
    }

    pub fn endpoints(&self) -> impl Iterator<Item = PinRef> + '_ {
        self.pins
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_endpoint)
            .map(|(i, _)| PinRef::new(i))
    }

    /// Requirement at an endpoint: explicit value, or early 0 / late clock period.
    pub fn endpoint_required(&self, pin: PinRef) -> CornerVector {
        self.pin(pin).required.unwrap_or(CornerVector([
            0.0,
            0.0,
            self.clock_period,
            self.clock_period,
        ]))
    }

    pub fn member_count(&self) -> usize {
        self.nets.iter().map(|n| n.members.len()).sum()
    }

    // Builder helpers used by tests and the generator.

    pub fn add_pin(&mut self, pin: Pin) -> PinRef {
        self.pins.push(pin);
        PinRef::new(self.pins.len() - 1)
    }

    pub fn add_lut(&mut self, lut: Lut2D) -> LutRef {
        self.luts.push(lut);
        LutRef::new(self.luts.len() - 1)
    }

    pub fn add_cell(&mut self, name: impl Into<String>) -> CellRef {
        self.cells.push(Cell {
            name: name.into(),
            arcs: Vec::new(),
        });
        CellRef::new(self.cells.len() - 1)
    }

    pub fn add_arc(
        &mut self,
        cell: CellRef,
        from: PinRef,
        to: PinRef,
        delay_lut: [LutRef; 4],
        slew_lut: [LutRef; 4],
    ) -> ArcRef {
        let arc = ArcRef::new(self.arcs.len());
        self.arcs.push(TimingArc {
            cell,
            from,
            to,
            delay_lut,
            slew_lut,
        });
        self.cells[cell.index()].arcs.push(arc);
        arc
    }

    pub fn add_net(&mut self, net: NetTopology) -> NetRef {
        self.nets.push(net);
        NetRef::new(self.nets.len() - 1)
    }
}

/// Derived connectivity of a design.
#[derive(Clone, Debug)]
pub struct DesignIndex {
    /// Net and member position for pins that are net members.
    pub member_of: Vec<Option<(NetRef, u32)>>,
    /// Net driven by a pin that is a net root.
    pub drives: Vec<Option<NetRef>>,
    pub fanin_arcs: Vec<Vec<ArcRef>>,
    pub fanout_arcs: Vec<Vec<ArcRef>>,
    pub trees: Vec<NetTree>,
}

impl DesignIndex {
    /// Builds the index. The design must have passed [`validate`].
    pub fn new(design: &Design) -> Result<Self, NetTreeError> {
        let n = design.pins.len();
        let mut member_of = vec![None; n];
        let mut drives = vec![None; n];
        let mut fanin_arcs = vec![Vec::new(); n];
        let mut fanout_arcs = vec![Vec::new(); n];
        let mut trees = Vec::with_capacity(design.nets.len());
        for (i, net) in design.nets.iter().enumerate() {
            let net_ref = NetRef::new(i);
            drives[net.root.index()] = Some(net_ref);
            for (pos, m) in net.members.iter().enumerate() {
                member_of[m.pin.index()] = Some((net_ref, pos as u32));
            }
            trees.push(net.tree()?);
        }
        for (i, arc) in design.arcs.iter().enumerate() {
            fanin_arcs[arc.to.index()].push(ArcRef::new(i));
            fanout_arcs[arc.from.index()].push(ArcRef::new(i));
        }
        Ok(Self {
            member_of,
            drives,
            fanin_arcs,
            fanout_arcs,
            trees,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_order_is_canonical() {
        let names: Vec<_> = Condition::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(names, ["early-rise", "early-fall", "late-rise", "late-fall"]);
        for (i, c) in Condition::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(Condition::from_index(i), *c);
        }
        assert_eq!(Condition::late(Edge::Fall), Condition::LateFall);
    }

    #[test]
    fn tree_rejects_forward_parent() {
        let net = NetTopology {
            root: PinRef(0),
            root_cap: CornerVector::ZERO,
            members: vec![
                NetMember {
                    pin: PinRef(1),
                    parent: PinRef(2),
                    res: CornerVector::ZERO,
                    cap: CornerVector::ZERO,
                },
                NetMember {
                    pin: PinRef(2),
                    parent: PinRef(0),
                    res: CornerVector::ZERO,
                    cap: CornerVector::ZERO,
                },
            ],
        };
        assert_eq!(net.tree(), Err(NetTreeError::BadParent { position: 0 }));
    }
}
