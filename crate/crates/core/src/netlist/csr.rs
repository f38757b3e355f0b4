// SPDX-License-Identifier: Apache-2.0

//! Compressed sparse row view of net membership. Each net occupies
//! `pin_list[net_index[i]..net_index[i + 1]]`, root first.

use super::{Design, NetRef, PinRef};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsrNetlist {
    pub pin_list: Vec<PinRef>,
    pub net_index: Vec<u32>,
}

impl CsrNetlist {
    pub fn num_nets(&self) -> usize {
        self.net_index.len() - 1
    }

    /// Root followed by members of `net`.
    pub fn pins(&self, net: NetRef) -> &[PinRef] {
        let lo = self.net_index[net.index()] as usize;
        let hi = self.net_index[net.index() + 1] as usize;
        &self.pin_list[lo..hi]
    }

    pub fn root(&self, net: NetRef) -> PinRef {
        self.pin_list[self.net_index[net.index()] as usize]
    }

    /// Number of sink pins of `net`.
    pub fn fanout(&self, net: NetRef) -> usize {
        (self.net_index[net.index() + 1] - self.net_index[net.index()]) as usize - 1
    }
}

pub fn build_csr(design: &Design) -> CsrNetlist {
    let total: usize = design.nets.iter().map(|n| n.members.len() + 1).sum();
    let mut pin_list = Vec::with_capacity(total);
    let mut net_index = Vec::with_capacity(design.nets.len() + 1);
    net_index.push(0u32);
    for net in &design.nets {
        pin_list.push(net.root);
        pin_list.extend(net.members.iter().map(|m| m.pin));
        net_index.push(u32::try_from(pin_list.len()).expect("pin list exceeds u32 range"));
    }
    CsrNetlist {
        pin_list,
        net_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CornerVector, NetMember, NetTopology, Pin};

    fn design_with_fanouts(fanouts: &[usize]) -> Design {
        let mut d = Design::empty(1.0);
        for (i, &k) in fanouts.iter().enumerate() {
            let root = d.add_pin(Pin::named(format!("r{i}")));
            let members = (0..k)
                .map(|j| NetMember {
                    pin: d.add_pin(Pin::named(format!("s{i}_{j}"))),
                    parent: root,
                    res: CornerVector::ZERO,
                    cap: CornerVector::ZERO,
                })
                .collect();
            d.add_net(NetTopology {
                root,
                root_cap: CornerVector::ZERO,
                members,
            });
        }
        d
    }

    #[test]
    fn offsets_include_root() {
        let csr = build_csr(&design_with_fanouts(&[2, 1, 3]));
        assert_eq!(csr.net_index, vec![0, 3, 5, 9]);
        assert_eq!(csr.pin_list.len(), 9);
        assert_eq!(csr.fanout(NetRef(2)), 3);
    }

    #[test]
    fn empty_design() {
        let csr = build_csr(&Design::empty(1.0));
        assert_eq!(csr.net_index, vec![0]);
        assert!(csr.pin_list.is_empty());
        assert_eq!(csr.num_nets(), 0);
    }

    #[test]
    fn regroup_matches_nets() {
        let d = design_with_fanouts(&[4, 0, 7, 1]);
        let csr = build_csr(&d);
        for (i, net) in d.nets.iter().enumerate() {
            let pins = csr.pins(NetRef::new(i));
            assert_eq!(pins[0], net.root);
            let members: Vec<_> = net.members.iter().map(|m| m.pin).collect();
            assert_eq!(&pins[1..], members.as_slice());
        }
    }
}
