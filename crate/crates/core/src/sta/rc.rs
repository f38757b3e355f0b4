// SPDX-License-Identifier: Apache-2.0

//! Per-net RC quantities: downstream load, Elmore delay and impulse.

use crate::netlist::{CornerVector, NetTopology, NetTree};
use crate::warp::scan::tree_reduce;

/// Summation order for the root load.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReductionOrder {
    /// Root capacitance plus root-child loads in member order.
    #[default]
    Sequential,
    /// Root-child loads accumulated into `lanes` partials by member position
    /// modulo `lanes`, then combined with [`tree_reduce`].
    Tree { lanes: usize },
}

/// RC results for one net; member vectors are indexed by member position.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetRc {
    pub root_load: CornerVector,
    pub load: Vec<CornerVector>,
    /// `res * load` of the edge into each member.
    pub edge_delay: Vec<CornerVector>,
    /// Path sum of edge delays from the root.
    pub delay: Vec<CornerVector>,
    pub impulse: Vec<CornerVector>,
}

/// Member loads (cap plus child loads) and the root load.
pub fn compute_net_loads(
    net: &NetTopology,
    tree: &NetTree,
    order: ReductionOrder,
) -> (CornerVector, Vec<CornerVector>) {
    let n = net.members.len();
    let mut load = vec![CornerVector::ZERO; n];
    for pos in (0..n).rev() {
        load[pos] = member_load(net, tree, &load, pos);
    }
    let root = root_load(net, tree, &load, order);
    (root, load)
}

/// Load of the member at `pos`, given final loads of its children.
#[inline]
pub fn member_load(
    net: &NetTopology,
    tree: &NetTree,
    load: &[CornerVector],
    pos: usize,
) -> CornerVector {
    let mut acc = net.members[pos].cap;
    for &ch in &tree.children[pos] {
        for c in 0..4 {
            acc.0[c] += load[ch as usize].0[c];
        }
    }
    acc
}

pub fn root_load(
    net: &NetTopology,
    tree: &NetTree,
    load: &[CornerVector],
    order: ReductionOrder,
) -> CornerVector {
    root_load_with(net, tree, |pos| load[pos], order, None)
}

/// Root load with member loads supplied by `load_of`. `skip_lane` drops one
/// partial from the tree reduction; it exists to exercise mismatch detection.
pub(crate) fn root_load_with(
    net: &NetTopology,
    tree: &NetTree,
    load_of: impl Fn(usize) -> CornerVector,
    order: ReductionOrder,
    skip_lane: Option<usize>,
) -> CornerVector {
    let mut root = net.root_cap;
    match order {
        ReductionOrder::Sequential => {
            for &ch in &tree.root_children {
                let l = load_of(ch as usize);
                for c in 0..4 {
                    root.0[c] += l.0[c];
                }
            }
        }
        ReductionOrder::Tree { lanes } => {
            let mut partial = vec![[0.0f64; 4]; lanes];
            for &ch in &tree.root_children {
                let lane = ch as usize % lanes;
                if skip_lane == Some(lane) {
                    continue;
                }
                let l = load_of(ch as usize);
                for c in 0..4 {
                    partial[lane][c] += l.0[c];
                }
            }
            let summed = reduce_partials(&mut partial);
            for c in 0..4 {
                root.0[c] += summed[c];
            }
        }
    }
    root
}

/// Per-condition [`tree_reduce`] over lane partials.
pub fn reduce_partials(partial: &mut [[f64; 4]]) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut column = vec![0.0f64; partial.len()];
    for (c, o) in out.iter_mut().enumerate() {
        for (dst, p) in column.iter_mut().zip(partial.iter()) {
            *dst = p[c];
        }
        *o = tree_reduce(&mut column);
    }
    out
}

#[inline]
pub fn edge_delay(net: &NetTopology, load: &[CornerVector], pos: usize) -> CornerVector {
    let res = net.members[pos].res;
    CornerVector(std::array::from_fn(|c| res.0[c] * load[pos].0[c]))
}

/// Edge delays and cumulative path delays (`Delay(root) = 0`).
pub fn compute_net_delays(
    net: &NetTopology,
    tree: &NetTree,
    load: &[CornerVector],
) -> (Vec<CornerVector>, Vec<CornerVector>) {
    let n = net.members.len();
    let mut edge = Vec::with_capacity(n);
    let mut delay: Vec<CornerVector> = Vec::with_capacity(n);
    for pos in 0..n {
        let e = edge_delay(net, load, pos);
        let base = tree.parent[pos].map_or(CornerVector::ZERO, |p| delay[p as usize]);
        delay.push(CornerVector(std::array::from_fn(|c| base.0[c] + e.0[c])));
        edge.push(e);
    }
    (edge, delay)
}

#[inline]
pub fn impulse(res: f64, cap: f64, delay: f64) -> f64 {
    (2.0 * res * cap * delay - delay * delay).max(0.0).sqrt()
}

pub fn compute_net_impulses(net: &NetTopology, delay: &[CornerVector]) -> Vec<CornerVector> {
    net.members
        .iter()
        .zip(delay)
        .map(|(m, d)| CornerVector(std::array::from_fn(|c| impulse(m.res.0[c], m.cap.0[c], d.0[c]))))
        .collect()
}

pub fn compute_net_rc(net: &NetTopology, tree: &NetTree, order: ReductionOrder) -> NetRc {
    let (root_load, load) = compute_net_loads(net, tree, order);
    let (edge_delay, delay) = compute_net_delays(net, tree, &load);
    let impulse = compute_net_impulses(net, &delay);
    NetRc {
        root_load,
        load,
        edge_delay,
        delay,
        impulse,
    }
}
