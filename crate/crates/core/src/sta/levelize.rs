// SPDX-License-Identifier: Apache-2.0

//! Groups nets into dependency levels.

use crate::netlist::{Design, DesignIndex, LevelRef, NetRef, PinRef};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelSchedule {
    /// Nets per level, ascending by net index within a level.
    pub levels: Vec<Vec<NetRef>>,
    pub level_of: Vec<LevelRef>,
}

impl LevelSchedule {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LevelizeError {
    #[error("combinational cycle through pin {pin:?}")]
    Cycle { pin: PinRef },
}

/// Net that produces the arrival at `pin`, if any.
pub(crate) fn source_net(index: &DesignIndex, pin: PinRef) -> Option<NetRef> {
    index.member_of[pin.index()]
        .map(|(net, _)| net)
        .or(index.drives[pin.index()])
}

/// Nets whose arrivals feed the driver of `net`, without duplicates.
pub(crate) fn driving_nets(design: &Design, index: &DesignIndex, net: NetRef) -> Vec<NetRef> {
    let root = design.net(net).root;
    let mut out: Vec<NetRef> = index.fanin_arcs[root.index()]
        .iter()
        .filter_map(|&a| source_net(index, design.arc(a).from))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Level of a net is 0 when its driver's inputs come only from primary
/// inputs, else one more than the deepest driving net.
pub fn levelize(design: &Design, index: &DesignIndex) -> Result<LevelSchedule, LevelizeError> {
    let n = design.nets.len();
    let deps: Vec<Vec<NetRef>> = (0..n)
        .map(|i| driving_nets(design, index, NetRef::new(i)))
        .collect();
    let mut users: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut pending: Vec<u32> = vec![0; n];
    for (i, d) in deps.iter().enumerate() {
        pending[i] = d.len() as u32;
        for dep in d {
            users[dep.index()].push(i as u32);
        }
    }
    let mut level = vec![0u32; n];
    let mut queue: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &u in &users[v] {
            let u = u as usize;
            level[u] = level[u].max(level[v] + 1);
            pending[u] -= 1;
            if pending[u] == 0 {
                queue.push(u);
            }
        }
    }
    if queue.len() < n {
        let mut cur = (0..n).find(|&i| pending[i] > 0).expect("unfinished net");
        let mut seen = vec![false; n];
        while !seen[cur] {
            seen[cur] = true;
            cur = deps[cur]
                .iter()
                .map(|d| d.index())
                .find(|&d| pending[d] > 0)
                .expect("blocked net has a blocked dependency");
        }
        return Err(LevelizeError::Cycle {
            pin: design.nets[cur].root,
        });
    }
    let depth = level.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut levels = vec![Vec::new(); depth];
    for (i, &l) in level.iter().enumerate() {
        levels[l as usize].push(NetRef::new(i));
    }
    Ok(LevelSchedule {
        levels,
        level_of: level.into_iter().map(LevelRef).collect(),
    })
}

/// Checks the schedule invariants: every net exactly once, `level_of`
/// consistent, and every driving net strictly earlier.
pub fn check_schedule(
    design: &Design,
    index: &DesignIndex,
    schedule: &LevelSchedule,
) -> Result<(), String> {
    let n = design.nets.len();
    if schedule.level_of.len() != n {
        return Err("level_of length differs from net count".into());
    }
    let mut seen = vec![false; n];
    for (l, nets) in schedule.levels.iter().enumerate() {
        for net in nets {
            if std::mem::replace(&mut seen[net.index()], true) {
                return Err(format!("net {} scheduled twice", net.0));
            }
            if schedule.level_of[net.index()].index() != l {
                return Err(format!("net {} level_of mismatch", net.0));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format!("net {i} not scheduled"));
    }
    for i in 0..n {
        let net = NetRef::new(i);
        for dep in driving_nets(design, index, net) {
            if schedule.level_of[dep.index()] >= schedule.level_of[i] {
                return Err(format!("net {i} does not follow driving net {}", dep.0));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CornerVector, DesignBuilder};

    fn levels(design: &Design) -> Vec<Vec<u32>> {
        let index = DesignIndex::new(design).unwrap();
        let s = levelize(design, &index).unwrap();
        check_schedule(design, &index, &s).unwrap();
        s.levels
            .iter()
            .map(|l| l.iter().map(|n| n.0).collect())
            .collect()
    }

    #[test]
    fn three_serial_nets() {
        let mut b = DesignBuilder::new(1.0);
        let (a1, y1) = b.gate("g1", 1, 1.0, 0.0);
        let (a2, y2) = b.gate("g2", 1, 1.0, 0.0);
        let (a3, y3) = b.gate("g3", 1, 1.0, 0.0);
        let o = b.endpoint("out");
        b.set_arrival(a1[0], CornerVector::ZERO);
        b.star(y1, &a2, 0.0, 0.0);
        b.star(y2, &a3, 0.0, 0.0);
        b.star(y3, &[o], 0.0, 0.0);
        assert_eq!(levels(&b.finish()), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn independent_nets_share_one_level() {
        let mut b = DesignBuilder::new(1.0);
        for i in 0..5 {
            let p = b.input(format!("i{i}"), CornerVector::ZERO);
            let e = b.endpoint(format!("o{i}"));
            b.star(p, &[e], 1.0, 1.0);
        }
        assert_eq!(levels(&b.finish()), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn diamond() {
        let mut b = DesignBuilder::new(1.0);
        let (a0, y0) = b.gate("g0", 1, 1.0, 0.0);
        let (a1, y1) = b.gate("g1", 1, 1.0, 0.0);
        let (a2, y2) = b.gate("g2", 1, 1.0, 0.0);
        let (a3, y3) = b.gate("g3", 2, 1.0, 0.0);
        let o = b.endpoint("out");
        b.set_arrival(a0[0], CornerVector::ZERO);
        b.star(y0, &[a1[0], a2[0]], 1.0, 1.0);
        b.star(y1, &a3[..1], 1.0, 1.0);
        b.star(y2, &a3[1..], 1.0, 1.0);
        b.star(y3, &[o], 1.0, 1.0);
        assert_eq!(levels(&b.finish()), vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn cycle_is_reported_with_a_pin() {
        let mut b = DesignBuilder::new(1.0);
        let (a0, y0) = b.gate("g0", 1, 1.0, 0.0);
        let (a1, y1) = b.gate("g1", 1, 1.0, 0.0);
        b.star(y0, &a1, 1.0, 1.0);
        b.star(y1, &a0, 1.0, 1.0);
        let d = b.finish();
        let index = DesignIndex::new(&d).unwrap();
        let err = levelize(&d, &index).unwrap_err();
        let LevelizeError::Cycle { pin } = err;
        assert!(pin == y0 || pin == y1);
    }
}
