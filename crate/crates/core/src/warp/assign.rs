// SPDX-License-Identifier: Apache-2.0

//! The three task-assignment schemes.

use crate::netlist::{Design, NetRef};
use crate::sta::Analysis;

use super::scan::{exclusive_scan, lower_bound, scan_steps, search_steps};
use super::{
    Block, ConditionMode, KernelAssignment, Scheme, TaskAssignment, Warp, WarpGeometry, WorkItem,
};

fn item(net: NetRef, pos: usize, cond: usize) -> WorkItem {
    WorkItem {
        net,
        pos: pos as u32,
        cond: cond as u8,
    }
}

/// One lane per net (or four with [`ConditionMode::Parallel`]); a lane walks
/// all of its net's members.
pub fn net_based_kernel(design: &Design, nets: &[NetRef], geometry: &WarpGeometry) -> KernelAssignment {
    let ws = geometry.warp_size as usize;
    let per_net_lanes = match geometry.net_conditions {
        ConditionMode::Serial => 1,
        ConditionMode::Parallel => 4,
    };
    let nets_per_warp = ws / per_net_lanes;
    let blocks = nets
        .chunks(nets_per_warp)
        .map(|chunk| {
            let mut lanes = vec![Vec::new(); ws];
            for (k, &net) in chunk.iter().enumerate() {
                let m = design.net(net).members.len();
                match geometry.net_conditions {
                    ConditionMode::Serial => {
                        lanes[k] = (0..m)
                            .flat_map(|p| (0..4).map(move |c| item(net, p, c)))
                            .collect();
                    }
                    ConditionMode::Parallel => {
                        for c in 0..4 {
                            lanes[4 * k + c] = (0..m).map(|p| item(net, p, c)).collect();
                        }
                    }
                }
            }
            Block {
                nets: chunk.to_vec(),
                warps: vec![Warp::from_lanes(lanes)],
                ..Block::default()
            }
        })
        .collect();
    KernelAssignment { blocks }
}

/// One warp per net: lane `x + x_dim * y` handles condition `x` of members
/// `y, y + y_dim, ...`.
pub fn pin_based_kernel(design: &Design, nets: &[NetRef], geometry: &WarpGeometry) -> KernelAssignment {
    let (xd, yd) = (geometry.x_dim as usize, geometry.y_dim as usize);
    let blocks = nets
        .chunks(geometry.nets_per_block as usize)
        .map(|chunk| {
            let warps = chunk
                .iter()
                .map(|&net| {
                    let m = design.net(net).members.len();
                    let mut lanes = vec![Vec::new(); xd * yd];
                    for y in 0..yd {
                        for x in 0..xd {
                            lanes[x + xd * y] = (y..m).step_by(yd).map(|p| item(net, p, x)).collect();
                        }
                    }
                    Warp::from_lanes(lanes)
                })
                .collect();
            Block {
                nets: chunk.to_vec(),
                warps,
                ..Block::default()
            }
        })
        .collect();
    KernelAssignment { blocks }
}

/// Blocks of `cte_block_size` nets pool their `members * 4` tasks through an
/// exclusive scan; thread `t` takes tasks `t, t + block_size, ...` and
/// locates each task's net by searching the prefix array.
pub fn cte_kernel(design: &Design, nets: &[NetRef], geometry: &WarpGeometry) -> KernelAssignment {
    let bs = geometry.cte_block_size as usize;
    let ws = geometry.warp_size as usize;
    let blocks = nets
        .chunks(bs)
        .map(|chunk| {
            let workloads: Vec<u64> = chunk
                .iter()
                .map(|&n| design.net(n).members.len() as u64 * 4)
                .collect();
            let mut prefix = exclusive_scan(&workloads);
            let total: u64 = workloads.iter().sum();
            prefix.push(total);
            let mut threads = vec![Vec::new(); bs];
            for (t, lane) in threads.iter_mut().enumerate() {
                let mut task = t as u64;
                while task < total {
                    let i = lower_bound(&prefix, task).expect("task within workload");
                    let local = (task - prefix[i]) as usize;
                    lane.push(item(chunk[i], local / 4, local % 4));
                    task += bs as u64;
                }
            }
            let mut warps = Vec::with_capacity(bs.div_ceil(ws));
            let mut rest = threads.into_iter();
            loop {
                let lanes: Vec<Vec<WorkItem>> = rest.by_ref().take(ws).collect();
                if lanes.is_empty() {
                    break;
                }
                warps.push(Warp::from_lanes(lanes));
            }
            Block {
                nets: chunk.to_vec(),
                warps,
                scan_steps: scan_steps(chunk.len()),
                search_steps: search_steps(prefix.len()),
                prefix,
            }
        })
        .collect();
    KernelAssignment { blocks }
}

fn rescheduling_steps(kernels: &[&KernelAssignment]) -> u64 {
    kernels
        .iter()
        .flat_map(|k| k.blocks.iter())
        .map(|b| {
            u64::from(b.scan_steps)
                + b.warps.iter().map(|w| w.trips() * u64::from(b.search_steps)).sum::<u64>()
        })
        .sum()
}

pub fn assign(analysis: &Analysis<'_>, scheme: Scheme, geometry: &WarpGeometry) -> TaskAssignment {
    let kernel = match scheme {
        Scheme::NetBased => net_based_kernel,
        Scheme::PinBased => pin_based_kernel,
        Scheme::Cte => cte_kernel,
    };
    let design = analysis.design;
    let all: Vec<NetRef> = (0..design.nets.len()).map(NetRef::new).collect();
    let rc = kernel(design, &all, geometry);
    let levels: Vec<KernelAssignment> = analysis
        .schedule
        .levels
        .iter()
        .map(|nets| kernel(design, nets, geometry))
        .collect();
    let mut refs: Vec<&KernelAssignment> = vec![&rc];
    refs.extend(levels.iter());
    let rescheduling_steps = rescheduling_steps(&refs);
    TaskAssignment {
        scheme,
        geometry: *geometry,
        rc,
        levels,
        rescheduling_steps,
    }
}

pub fn assign_net_based(analysis: &Analysis<'_>, geometry: &WarpGeometry) -> TaskAssignment {
    assign(analysis, Scheme::NetBased, geometry)
}

pub fn assign_pin_based(analysis: &Analysis<'_>, geometry: &WarpGeometry) -> TaskAssignment {
    assign(analysis, Scheme::PinBased, geometry)
}

pub fn assign_cte(analysis: &Analysis<'_>, geometry: &WarpGeometry) -> TaskAssignment {
    assign(analysis, Scheme::Cte, geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CornerVector, DesignBuilder};

    /// Independent star nets with the given member counts, driven by primary inputs.
    pub(crate) fn stars(sizes: &[usize]) -> Design {
        let mut b = DesignBuilder::new(1.0);
        for (i, &m) in sizes.iter().enumerate() {
            let root = b.input(format!("i{i}"), CornerVector::ZERO);
            let sinks: Vec<_> = (0..m).map(|j| b.endpoint(format!("o{i}_{j}"))).collect();
            b.star(root, &sinks, 1.0, 1.0);
        }
        b.finish()
    }

    fn nets(d: &Design) -> Vec<NetRef> {
        (0..d.nets.len()).map(NetRef::new).collect()
    }

    #[test]
    fn net_based_full_warp() {
        let d = stars(&[1; 32]);
        let k = net_based_kernel(&d, &nets(&d), &WarpGeometry::default());
        assert_eq!(k.blocks.len(), 1);
        let w = &k.blocks[0].warps[0];
        assert!((0..32).all(|l| w.lane(l).len() == 4));
    }

    #[test]
    fn net_based_tail_warp() {
        let d = stars(&[1; 33]);
        let k = net_based_kernel(&d, &nets(&d), &WarpGeometry::default());
        assert_eq!(k.blocks.len(), 2);
        let w = &k.blocks[1].warps[0];
        assert_eq!(w.lane(0).len(), 4);
        assert!((1..32).all(|l| w.lane(l).is_empty()));
    }

    #[test]
    fn pin_based_strides() {
        let d = stars(&[8, 33]);
        let k = pin_based_kernel(&d, &nets(&d), &WarpGeometry::default());
        let w8 = &k.blocks[0].warps[0];
        assert!((0..32).all(|l| w8.lane(l).len() == 1));
        assert_eq!(w8.trips(), 1);
        let w33 = &k.blocks[0].warps[1];
        assert_eq!(w33.trips(), 5);
        // Last trip: only y-lane 0 (lanes 0..4) has member 32.
        let last_trip: Vec<usize> = (0..32).filter(|&l| w33.lane(l).len() == 5).collect();
        assert_eq!(last_trip, vec![0, 1, 2, 3]);
        assert_eq!(w33.lane(2)[4], item(NetRef(1), 32, 2));
    }

    #[test]
    fn cte_block_arithmetic() {
        let d = stars(&[2, 1, 3, 0]);
        let k = cte_kernel(&d, &nets(&d), &WarpGeometry::default());
        let b = &k.blocks[0];
        assert_eq!(b.prefix, vec![0, 8, 12, 24, 24]);
        let w = &b.warps[0];
        assert!((0..24).all(|l| w.lane(l).len() == 1));
        assert!((24..32).all(|l| w.lane(l).is_empty()));
        assert_eq!(w.trips(), 1);
        assert_eq!(w.lane(9)[0], item(NetRef(1), 0, 1));
        assert_eq!(w.lane(23)[0], item(NetRef(2), 2, 3));
    }
}
