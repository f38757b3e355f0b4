// SPDX-License-Identifier: Apache-2.0

//! Structural checks on a [`Design`]. Violations are reported as data.

use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{CellRef, CornerVector, Design, LutRef, NetRef, PinRef};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InvalidClockPeriod,
    DanglingReference { context: String },
    DuplicatePinName { name: String },
    NonFiniteValue { context: String },
    InvalidLut { lut: LutRef, reason: String },
    NonTreeNet { net: NetRef },
    NotTopological { net: NetRef, member: PinRef },
    MultiplyDriven { pin: PinRef },
    DuplicateNetRoot { pin: PinRef },
    ArcAcrossCells { pin: PinRef },
    OutputWithoutNet { pin: PinRef },
    UndrivenNetRoot { net: NetRef },
    UndrivenPin { pin: PinRef },
    RootFeedsArc { pin: PinRef },
    CyclicConnectivity { pin: PinRef },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidClockPeriod => write!(f, "clock period must be positive and finite"),
            Violation::DanglingReference { context } => write!(f, "dangling reference: {context}"),
            Violation::DuplicatePinName { name } => write!(f, "duplicate pin name '{name}'"),
            Violation::NonFiniteValue { context } => write!(f, "non-finite value in {context}"),
            Violation::InvalidLut { lut, reason } => write!(f, "invalid lut {}: {reason}", lut.0),
            Violation::NonTreeNet { net } => write!(f, "non-tree net {}", net.0),
            Violation::NotTopological { net, member } => write!(
                f,
                "net not in topological order: net {}, member pin {} listed before its parent",
                net.0, member.0
            ),
            Violation::MultiplyDriven { pin } => write!(f, "pin {} is driven more than once", pin.0),
            Violation::DuplicateNetRoot { pin } => write!(f, "pin {} is the root of several nets", pin.0),
            Violation::ArcAcrossCells { pin } => {
                write!(f, "pin {} is attached to arcs of different cells", pin.0)
            }
            Violation::OutputWithoutNet { pin } => {
                write!(f, "cell output pin {} does not drive a net", pin.0)
            }
            Violation::UndrivenNetRoot { net } => {
                write!(f, "root of net {} is neither a primary input nor a cell output", net.0)
            }
            Violation::UndrivenPin { pin } => write!(f, "pin {} has no driver", pin.0),
            Violation::RootFeedsArc { pin } => {
                write!(f, "primary input {} both roots a net and feeds a cell arc", pin.0)
            }
            Violation::CyclicConnectivity { pin } => {
                write!(f, "cyclic connectivity through pin {}", pin.0)
            }
        }
    }
}

/// Returns every violated design invariant; empty means the design is usable.
pub fn validate(design: &Design) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(design.clock_period.is_finite() && design.clock_period > 0.0) {
        out.push(Violation::InvalidClockPeriod);
    }
    check_luts(design, &mut out);
    check_values(design, &mut out);
    if !check_references(design, &mut out) {
        return out;
    }
    let mut names = HashSet::with_capacity(design.pins.len());
    for pin in &design.pins {
        if !names.insert(pin.name.as_str()) {
            out.push(Violation::DuplicatePinName {
                name: pin.name.clone(),
            });
        }
    }
    let tree_ok = check_trees(design, &mut out);
    check_drivers(design, &mut out);
    if tree_ok {
        if let Some(pin) = find_cycle(design) {
            out.push(Violation::CyclicConnectivity { pin });
        }
    }
    out
}

fn check_luts(design: &Design, out: &mut Vec<Violation>) {
    let increasing = |axis: &[f64]| {
        !axis.is_empty()
            && axis.iter().all(|v| v.is_finite())
            && axis.windows(2).all(|w| w[0] < w[1])
    };
    for (i, lut) in design.luts.iter().enumerate() {
        let lut_ref = LutRef::new(i);
        let reason = if !increasing(&lut.slew_axis) {
            Some("slew axis must be non-empty and strictly increasing")
        } else if !increasing(&lut.load_axis) {
            Some("load axis must be non-empty and strictly increasing")
        } else if lut.table.len() != lut.slew_axis.len()
            || lut.table.iter().any(|row| row.len() != lut.load_axis.len())
        {
            Some("table dimensions do not match axes")
        } else if lut.table.iter().flatten().any(|v| !v.is_finite()) {
            Some("table entries must be finite")
        } else {
            None
        };
        if let Some(reason) = reason {
            out.push(Violation::InvalidLut {
                lut: lut_ref,
                reason: reason.to_string(),
            });
        }
    }
}

fn check_values(design: &Design, out: &mut Vec<Violation>) {
    let mut bad = |ok: bool, context: String| {
        if !ok {
            out.push(Violation::NonFiniteValue { context });
        }
    };
    let finite = |v: &Option<CornerVector>| v.is_none_or(|v| v.is_finite());
    for pin in &design.pins {
        bad(finite(&pin.arrival), format!("arrival of pin '{}'", pin.name));
        bad(finite(&pin.required), format!("required of pin '{}'", pin.name));
        bad(finite(&pin.slew), format!("slew of pin '{}'", pin.name));
    }
    for (i, net) in design.nets.iter().enumerate() {
        bad(net.root_cap.is_finite(), format!("root cap of net {i}"));
        for m in &net.members {
            bad(
                m.res.is_finite() && m.cap.is_finite(),
                format!("member parasitics of net {i}"),
            );
        }
    }
}

/// Bounds checks. Returns false when later checks cannot index safely.
fn check_references(design: &Design, out: &mut Vec<Violation>) -> bool {
    let start = out.len();
    let pins = design.pins.len();
    let mut dangling = |context: String| out.push(Violation::DanglingReference { context });
    for (i, arc) in design.arcs.iter().enumerate() {
        if arc.from.index() >= pins || arc.to.index() >= pins {
            dangling(format!("arc {i} pin"));
        }
        if arc.cell.index() >= design.cells.len() {
            dangling(format!("arc {i} cell"));
        }
        if arc
            .delay_lut
            .iter()
            .chain(arc.slew_lut.iter())
            .any(|l| l.index() >= design.luts.len())
        {
            dangling(format!("arc {i} lut"));
        }
    }
    for (c, cell) in design.cells.iter().enumerate() {
        for &arc in &cell.arcs {
            match design.arcs.get(arc.index()) {
                Some(a) if a.cell == CellRef::new(c) => {}
                _ => dangling(format!("cell {c} arc {}", arc.0)),
            }
        }
    }
    for (i, net) in design.nets.iter().enumerate() {
        if net.root.index() >= pins {
            dangling(format!("net {i} root"));
        }
        for m in &net.members {
            if m.pin.index() >= pins || m.parent.index() >= pins {
                dangling(format!("net {i} member"));
            }
        }
    }
    out.len() == start
}

fn check_trees(design: &Design, out: &mut Vec<Violation>) -> bool {
    let mut ok = true;
    for (i, net) in design.nets.iter().enumerate() {
        let net_ref = NetRef::new(i);
        let mut position: HashMap<PinRef, usize> = HashMap::with_capacity(net.members.len());
        let mut distinct = true;
        for (pos, m) in net.members.iter().enumerate() {
            if m.pin == net.root || position.insert(m.pin, pos).is_some() {
                distinct = false;
            }
        }
        let parent_pos: Option<Vec<Option<usize>>> = net
            .members
            .iter()
            .map(|m| {
                if m.parent == net.root {
                    Some(None)
                } else {
                    position.get(&m.parent).map(|&p| Some(p))
                }
            })
            .collect();
        let Some(parent_pos) = parent_pos.filter(|_| distinct) else {
            out.push(Violation::NonTreeNet { net: net_ref });
            ok = false;
            continue;
        };
        // Every member must reach the root through parent links.
        let n = net.members.len();
        let mut reaches_root = vec![false; n];
        let mut cyclic = false;
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            let mut on_path = HashSet::new();
            loop {
                if reaches_root[cur] {
                    break;
                }
                if !on_path.insert(cur) {
                    cyclic = true;
                    break;
                }
                path.push(cur);
                match parent_pos[cur] {
                    None => break,
                    Some(p) => cur = p,
                }
            }
            if cyclic {
                break;
            }
            for p in path {
                reaches_root[p] = true;
            }
        }
        if cyclic {
            out.push(Violation::NonTreeNet { net: net_ref });
            ok = false;
            continue;
        }
        if let Some(pos) = (0..n).find(|&pos| matches!(parent_pos[pos], Some(p) if p > pos)) {
            out.push(Violation::NotTopological {
                net: net_ref,
                member: net.members[pos].pin,
            });
            ok = false;
        }
    }
    ok
}

fn check_drivers(design: &Design, out: &mut Vec<Violation>) {
    let n = design.pins.len();
    let mut member_count = vec![0u32; n];
    let mut root_count = vec![0u32; n];
    let mut out_cell: Vec<Option<CellRef>> = vec![None; n];
    let mut in_cell: Vec<Option<CellRef>> = vec![None; n];
    let mut across = vec![false; n];
    for net in &design.nets {
        root_count[net.root.index()] += 1;
        for m in &net.members {
            member_count[m.pin.index()] += 1;
        }
    }
    for arc in &design.arcs {
        for (pin, slot) in [(arc.to, &mut out_cell), (arc.from, &mut in_cell)] {
            match slot[pin.index()] {
                None => slot[pin.index()] = Some(arc.cell),
                Some(c) if c != arc.cell => across[pin.index()] = true,
                _ => {}
            }
        }
    }
    for i in 0..n {
        let pin = PinRef::new(i);
        let is_pi = design.pins[i].is_primary_input();
        let is_output = out_cell[i].is_some();
        let drivers = member_count[i] + u32::from(is_output) + u32::from(is_pi);
        if drivers > 1 {
            out.push(Violation::MultiplyDriven { pin });
        } else if drivers == 0 {
            out.push(Violation::UndrivenPin { pin });
        }
        if root_count[i] > 1 {
            out.push(Violation::DuplicateNetRoot { pin });
        }
        if across[i] {
            out.push(Violation::ArcAcrossCells { pin });
        }
        if is_output && root_count[i] == 0 {
            out.push(Violation::OutputWithoutNet { pin });
        }
        if is_pi && root_count[i] > 0 && in_cell[i].is_some() {
            out.push(Violation::RootFeedsArc { pin });
        }
    }
    for (i, net) in design.nets.iter().enumerate() {
        let root = net.root.index();
        if !design.pins[root].is_primary_input() && out_cell[root].is_none() {
            out.push(Violation::UndrivenNetRoot {
                net: NetRef::new(i),
            });
        }
    }
}

/// Kahn's algorithm over root->member and arc edges; returns a pin on a cycle.
fn find_cycle(design: &Design) -> Option<PinRef> {
    let n = design.pins.len();
    let mut succ: Vec<Vec<u32>> = vec![Vec::new(); n];
    for net in &design.nets {
        for m in &net.members {
            succ[net.root.index()].push(m.pin.0);
        }
    }
    for arc in &design.arcs {
        succ[arc.from.index()].push(arc.to.0);
    }
    let mut indeg = vec![0u32; n];
    for s in succ.iter().flatten() {
        indeg[*s as usize] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = stack.pop() {
        removed[v] = true;
        for &s in &succ[v] {
            indeg[s as usize] -= 1;
            if indeg[s as usize] == 0 {
                stack.push(s as usize);
            }
        }
    }
    let start = (0..n).find(|&i| !removed[i])?;
    // Walk remaining successors until a pin repeats; that pin is on a cycle.
    let mut seen = HashSet::new();
    let mut cur = start;
    while seen.insert(cur) {
        cur = succ[cur]
            .iter()
            .map(|&s| s as usize)
            .find(|&s| !removed[s])
            .expect("remaining pin has a remaining successor");
    }
    Some(PinRef::new(cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Lut2D, NetMember, NetTopology, Pin};

    fn member(pin: PinRef, parent: PinRef) -> NetMember {
        NetMember {
            pin,
            parent,
            res: CornerVector::splat(1.0),
            cap: CornerVector::splat(1.0),
        }
    }

    fn pi(name: &str) -> Pin {
        Pin {
            arrival: Some(CornerVector::ZERO),
            ..Pin::named(name)
        }
    }

    #[test]
    fn minimal_design_is_valid() {
        let mut d = Design::empty(1.0);
        let a = d.add_pin(pi("a"));
        let b = d.add_pin(Pin {
            is_endpoint: true,
            ..Pin::named("b")
        });
        d.add_net(NetTopology {
            root: a,
            root_cap: CornerVector::ZERO,
            members: vec![member(b, a)],
        });
        assert_eq!(validate(&d), vec![]);
    }

    #[test]
    fn two_cycle_parent_pointers_is_one_non_tree_violation() {
        let mut d = Design::empty(1.0);
        let a = d.add_pin(pi("a"));
        let b = d.add_pin(Pin::named("b"));
        let c = d.add_pin(Pin::named("c"));
        d.add_net(NetTopology {
            root: a,
            root_cap: CornerVector::ZERO,
            members: vec![member(b, c), member(c, b)],
        });
        let v = validate(&d);
        assert_eq!(
            v.iter()
                .filter(|v| matches!(v, Violation::NonTreeNet { .. }))
                .count(),
            1
        );
        assert!(!v.iter().any(|v| matches!(v, Violation::CyclicConnectivity { .. })));
    }

    #[test]
    fn later_parent_is_not_topological() {
        let mut d = Design::empty(1.0);
        let a = d.add_pin(pi("a"));
        let b = d.add_pin(Pin::named("b"));
        let c = d.add_pin(Pin::named("c"));
        d.add_net(NetTopology {
            root: a,
            root_cap: CornerVector::ZERO,
            members: vec![member(b, c), member(c, a)],
        });
        assert_eq!(
            validate(&d),
            vec![Violation::NotTopological {
                net: NetRef(0),
                member: b
            }]
        );
        assert!(validate(&d)[0].to_string().contains("not in topological order"));
    }

    #[test]
    fn combinational_loop_across_two_cells() {
        // c0: x0 -> y0, c1: x1 -> y1, net y0 -> x1, net y1 -> x0
        let mut d = Design::empty(1.0);
        let lut = d.add_lut(Lut2D::constant(1.0));
        let x0 = d.add_pin(Pin::named("x0"));
        let y0 = d.add_pin(Pin::named("y0"));
        let x1 = d.add_pin(Pin::named("x1"));
        let y1 = d.add_pin(Pin::named("y1"));
        let c0 = d.add_cell("c0");
        let c1 = d.add_cell("c1");
        d.add_arc(c0, x0, y0, [lut; 4], [lut; 4]);
        d.add_arc(c1, x1, y1, [lut; 4], [lut; 4]);
        d.add_net(NetTopology {
            root: y0,
            root_cap: CornerVector::ZERO,
            members: vec![member(x1, y0)],
        });
        d.add_net(NetTopology {
            root: y1,
            root_cap: CornerVector::ZERO,
            members: vec![member(x0, y1)],
        });
        let v = validate(&d);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::CyclicConnectivity { .. }));
    }

    #[test]
    fn dangling_pin_reference() {
        let mut d = Design::empty(1.0);
        let a = d.add_pin(pi("a"));
        d.add_net(NetTopology {
            root: a,
            root_cap: CornerVector::ZERO,
            members: vec![member(PinRef(7), a)],
        });
        assert!(matches!(
            validate(&d).as_slice(),
            [Violation::DanglingReference { .. }]
        ));
    }

    #[test]
    fn bad_lut_and_clock() {
        let mut d = Design::empty(0.0);
        d.add_lut(Lut2D {
            slew_axis: vec![1.0, 0.5],
            load_axis: vec![0.0],
            table: vec![vec![0.0], vec![0.0]],
        });
        let v = validate(&d);
        assert!(v.contains(&Violation::InvalidClockPeriod));
        assert!(v.iter().any(|v| matches!(v, Violation::InvalidLut { .. })));
    }

    #[test]
    fn multiply_driven_and_undriven() {
        let mut d = Design::empty(1.0);
        let a = d.add_pin(pi("a"));
        let b = d.add_pin(pi("b"));
        let floating = d.add_pin(Pin::named("f"));
        d.add_net(NetTopology {
            root: a,
            root_cap: CornerVector::ZERO,
            members: vec![member(b, a)],
        });
        let v = validate(&d);
        assert!(v.contains(&Violation::MultiplyDriven { pin: b }));
        assert!(v.contains(&Violation::UndrivenPin { pin: floating }));
    }
}
