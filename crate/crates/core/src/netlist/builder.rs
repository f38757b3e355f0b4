// SPDX-License-Identifier: Apache-2.0

//! Programmatic construction of small designs.

use std::collections::HashMap;

use super::{CornerVector, Design, Lut2D, LutRef, NetMember, NetRef, NetTopology, Pin, PinRef};

pub struct DesignBuilder {
    design: Design,
    constants: HashMap<u64, LutRef>,
}

impl DesignBuilder {
    pub fn new(clock_period: f64) -> Self {
        Self {
            design: Design::empty(clock_period),
            constants: HashMap::new(),
        }
    }

    pub fn pin(&mut self, name: impl Into<String>) -> PinRef {
        self.design.add_pin(Pin::named(name))
    }

    /// Primary input with the given arrival and zero slew.
    pub fn input(&mut self, name: impl Into<String>, arrival: CornerVector) -> PinRef {
        self.design.add_pin(Pin {
            arrival: Some(arrival),
            ..Pin::named(name)
        })
    }

    pub fn endpoint(&mut self, name: impl Into<String>) -> PinRef {
        self.design.add_pin(Pin {
            is_endpoint: true,
            ..Pin::named(name)
        })
    }

    pub fn set_required(&mut self, pin: PinRef, required: CornerVector) {
        let p = &mut self.design.pins[pin.index()];
        p.is_endpoint = true;
        p.required = Some(required);
    }

    /// Marks `pin` as a primary input.
    pub fn set_arrival(&mut self, pin: PinRef, arrival: CornerVector) {
        self.design.pins[pin.index()].arrival = Some(arrival);
    }

    pub fn set_slew(&mut self, pin: PinRef, slew: CornerVector) {
        self.design.pins[pin.index()].slew = Some(slew);
    }

    pub fn lut(&mut self, lut: Lut2D) -> LutRef {
        self.design.add_lut(lut)
    }

    /// Shared 1x1 table evaluating to `value`.
    pub fn constant_lut(&mut self, value: f64) -> LutRef {
        if let Some(&l) = self.constants.get(&value.to_bits()) {
            return l;
        }
        let l = self.design.add_lut(Lut2D::constant(value));
        self.constants.insert(value.to_bits(), l);
        l
    }

    /// Cell with inputs `name/A0..` and output `name/Y`; every arc uses the
    /// given tables for all conditions.
    pub fn gate_with_luts(
        &mut self,
        name: &str,
        inputs: usize,
        delay: [LutRef; 4],
        slew: [LutRef; 4],
    ) -> (Vec<PinRef>, PinRef) {
        let ins: Vec<PinRef> = (0..inputs)
            .map(|i| self.pin(format!("{name}/A{i}")))
            .collect();
        let out = self.pin(format!("{name}/Y"));
        let cell = self.design.add_cell(name);
        for &i in &ins {
            self.design.add_arc(cell, i, out, delay, slew);
        }
        (ins, out)
    }

    /// Cell whose arcs have constant delay and output slew.
    pub fn gate(&mut self, name: &str, inputs: usize, delay: f64, slew: f64) -> (Vec<PinRef>, PinRef) {
        let d = self.constant_lut(delay);
        let s = self.constant_lut(slew);
        self.gate_with_luts(name, inputs, [d; 4], [s; 4])
    }

    /// Cell with one constant-delay arc per entry of `delays`.
    pub fn gate_with_delays(&mut self, name: &str, delays: &[f64], slew: f64) -> (Vec<PinRef>, PinRef) {
        let ins: Vec<PinRef> = (0..delays.len())
            .map(|i| self.pin(format!("{name}/A{i}")))
            .collect();
        let out = self.pin(format!("{name}/Y"));
        let cell = self.design.add_cell(name);
        let s = self.constant_lut(slew);
        for (&i, &d) in ins.iter().zip(delays) {
            let d = self.constant_lut(d);
            self.design.add_arc(cell, i, out, [d; 4], [s; 4]);
        }
        (ins, out)
    }

    /// Star net with uniform edge resistance and sink capacitance.
    pub fn star(&mut self, root: PinRef, sinks: &[PinRef], res: f64, cap: f64) -> NetRef {
        let members = sinks
            .iter()
            .map(|&pin| NetMember {
                pin,
                parent: root,
                res: CornerVector::splat(res),
                cap: CornerVector::splat(cap),
            })
            .collect();
        self.net(root, CornerVector::ZERO, members)
    }

    pub fn net(&mut self, root: PinRef, root_cap: CornerVector, members: Vec<NetMember>) -> NetRef {
        self.design.add_net(NetTopology {
            root,
            root_cap,
            members,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn finish(self) -> Design {
        self.design
    }
}
