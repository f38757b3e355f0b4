// SPDX-License-Identifier: Apache-2.0

//! Forward arrival and backward required-time propagation.

use crate::netlist::{Condition, CornerVector, Design, DesignIndex, Mode, NetRef, PinRef};

use super::levelize::{levelize, LevelSchedule};
use super::lut::interpolate_lut;
use super::rc::{compute_net_rc, NetRc, ReductionOrder};
use super::{index_design, StaError, TimingState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StaConfig {
    pub reduction: ReductionOrder,
}

/// A validated, indexed and levelized design ready for analysis.
#[derive(Clone, Debug)]
pub struct Analysis<'d> {
    pub design: &'d Design,
    pub index: DesignIndex,
    pub schedule: LevelSchedule,
}

#[inline]
fn worse(mode: Mode, candidate: f64, current: f64) -> bool {
    match mode {
        Mode::Late => candidate > current,
        Mode::Early => candidate < current,
    }
}

/// Identity for required-time combination: late takes the minimum, early the maximum.
#[inline]
pub fn unconstrained(cond: Condition) -> f64 {
    match cond.mode() {
        Mode::Late => f64::INFINITY,
        Mode::Early => f64::NEG_INFINITY,
    }
}

#[inline]
pub fn combine_required(cond: Condition, a: f64, b: f64) -> f64 {
    match cond.mode() {
        Mode::Late => a.min(b),
        Mode::Early => a.max(b),
    }
}

impl<'d> Analysis<'d> {
    pub fn new(design: &'d Design) -> Result<Self, StaError> {
        let index = index_design(design)?;
        let schedule = levelize(design, &index)?;
        Ok(Self {
            design,
            index,
            schedule,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.schedule.num_levels()
    }

    /// Fresh state with primary-input arrivals and slews seeded.
    pub fn new_state(&self) -> TimingState {
        let mut state = TimingState::new(self.design.pins.len(), self.design.arcs.len());
        for (pin, arrival) in self.design.primary_inputs() {
            let i = pin.index();
            state.arrival[i] = arrival;
            state.slew[i] = self.design.pins[i].slew.unwrap_or(CornerVector::ZERO);
            state.arrival_ready[i] = true;
        }
        state
    }

    pub fn apply_net_rc(&self, net: NetRef, rc: &NetRc, state: &mut TimingState) {
        let topo = self.design.net(net);
        state.load[topo.root.index()] = rc.root_load;
        for (pos, m) in topo.members.iter().enumerate() {
            let i = m.pin.index();
            state.load[i] = rc.load[pos];
            state.edge_delay[i] = rc.edge_delay[pos];
            state.net_delay[i] = rc.delay[pos];
            state.impulse[i] = rc.impulse[pos];
        }
    }

    pub fn net_rc(&self, net: NetRef, order: ReductionOrder) -> NetRc {
        compute_net_rc(self.design.net(net), &self.index.trees[net.index()], order)
    }

    pub fn compute_rc(&self, state: &mut TimingState, order: ReductionOrder) {
        for i in 0..self.design.nets.len() {
            let net = NetRef::new(i);
            let rc = self.net_rc(net, order);
            self.apply_net_rc(net, &rc, state);
        }
    }

    /// Arrival and slew at the root of `net`: arc delays through the driving
    /// cell, or the seeded values of a primary input.
    pub fn evaluate_driver(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        let root = self.design.net(net).root;
        let r = root.index();
        if self.design.pins[r].is_primary_input() {
            return Ok(());
        }
        let load = state.load[r];
        let mut arrival = CornerVector::ZERO;
        let mut slew = CornerVector::ZERO;
        for (k, &arc_ref) in self.index.fanin_arcs[r].iter().enumerate() {
            let arc = self.design.arc(arc_ref);
            let from = arc.from.index();
            if !state.arrival_ready[from] {
                return Err(StaError::ScheduleViolation {
                    stage: "forward",
                    pin: arc.from,
                });
            }
            for cond in Condition::ALL {
                let c = cond.index();
                let s_in = state.slew[from].0[c];
                let d = interpolate_lut(self.design.lut(arc.delay_lut[c]), s_in, load.0[c]);
                let s = interpolate_lut(self.design.lut(arc.slew_lut[c]), s_in, load.0[c]);
                state.arc_delay[arc_ref.index()].0[c] = d;
                let candidate = state.arrival[from].0[c] + d;
                if k == 0 || worse(cond.mode(), candidate, arrival.0[c]) {
                    arrival.0[c] = candidate;
                }
                if k == 0 || worse(cond.mode(), s, slew.0[c]) {
                    slew.0[c] = s;
                }
            }
        }
        state.arrival[r] = arrival;
        state.slew[r] = slew;
        state.arrival_ready[r] = true;
        Ok(())
    }

    /// Arrival and slew of one sink for one condition.
    #[inline]
    pub fn sink_timing(state: &TimingState, root: PinRef, pin: PinRef, c: usize) -> (f64, f64) {
        let at = state.arrival[root.index()].0[c] + state.net_delay[pin.index()].0[c];
        let s_root = state.slew[root.index()].0[c];
        let imp = state.impulse[pin.index()].0[c];
        (at, (s_root * s_root + imp * imp).sqrt())
    }

    pub fn propagate_sinks(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        let topo = self.design.net(net);
        if !state.arrival_ready[topo.root.index()] {
            return Err(StaError::ScheduleViolation {
                stage: "forward",
                pin: topo.root,
            });
        }
        for m in &topo.members {
            let i = m.pin.index();
            for c in 0..4 {
                let (at, slew) = Self::sink_timing(state, topo.root, m.pin, c);
                state.arrival[i].0[c] = at;
                state.slew[i].0[c] = slew;
            }
            state.arrival_ready[i] = true;
        }
        Ok(())
    }

    pub fn forward_net(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        self.evaluate_driver(net, state)?;
        self.propagate_sinks(net, state)
    }

    pub fn forward_level(&self, level: usize, state: &mut TimingState) -> Result<(), StaError> {
        for &net in &self.schedule.levels[level] {
            self.forward_net(net, state)?;
        }
        Ok(())
    }

    /// Required time at `pin` from its endpoint constraint and fanout arcs.
    pub fn pin_required(&self, pin: PinRef, cond: Condition, state: &TimingState) -> Result<f64, StaError> {
        let c = cond.index();
        let mut r = unconstrained(cond);
        let p = &self.design.pins[pin.index()];
        if p.is_endpoint {
            r = combine_required(cond, r, self.design.endpoint_required(pin).0[c]);
        }
        for &arc_ref in &self.index.fanout_arcs[pin.index()] {
            let arc = self.design.arc(arc_ref);
            if !state.required_ready[arc.to.index()] {
                return Err(StaError::ScheduleViolation {
                    stage: "backward",
                    pin: arc.to,
                });
            }
            let candidate = state.required[arc.to.index()].0[c] - state.arc_delay[arc_ref.index()].0[c];
            r = combine_required(cond, r, candidate);
        }
        Ok(r)
    }

    pub fn backward_members(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        let topo = self.design.net(net);
        for m in topo.members.iter().rev() {
            let mut r = CornerVector::ZERO;
            for cond in Condition::ALL {
                r[cond] = self.pin_required(m.pin, cond, state)?;
            }
            state.required[m.pin.index()] = r;
            state.required_ready[m.pin.index()] = true;
        }
        Ok(())
    }

    /// Root required time: own constraint and fanout arcs combined with
    /// every member's required time less its net delay.
    pub fn backward_root(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        let topo = self.design.net(net);
        let mut r = CornerVector::ZERO;
        for cond in Condition::ALL {
            let c = cond.index();
            let mut v = self.pin_required(topo.root, cond, state)?;
            for m in &topo.members {
                let i = m.pin.index();
                v = combine_required(cond, v, state.required[i].0[c] - state.net_delay[i].0[c]);
            }
            r.0[c] = v;
        }
        state.required[topo.root.index()] = r;
        state.required_ready[topo.root.index()] = true;
        Ok(())
    }

    pub fn backward_net(&self, net: NetRef, state: &mut TimingState) -> Result<(), StaError> {
        self.backward_members(net, state)?;
        self.backward_root(net, state)
    }

    pub fn backward_level(&self, level: usize, state: &mut TimingState) -> Result<(), StaError> {
        for &net in self.schedule.levels[level].iter().rev() {
            self.backward_net(net, state)?;
        }
        Ok(())
    }

    /// Required times of pins outside every net (primary inputs feeding
    /// cells directly), then slacks for all pins.
    pub fn finish(&self, state: &mut TimingState) -> Result<(), StaError> {
        for i in 0..self.design.pins.len() {
            if self.index.member_of[i].is_some() || self.index.drives[i].is_some() {
                continue;
            }
            let pin = PinRef::new(i);
            let mut r = CornerVector::ZERO;
            for cond in Condition::ALL {
                r[cond] = self.pin_required(pin, cond, state)?;
            }
            state.required[i] = r;
            state.required_ready[i] = true;
        }
        for i in 0..self.design.pins.len() {
            state.slack[i] = slack(state.arrival[i], state.required[i]);
        }
        Ok(())
    }

    pub fn run(&self, config: &StaConfig) -> Result<TimingState, StaError> {
        let mut state = self.new_state();
        self.compute_rc(&mut state, config.reduction);
        for level in 0..self.num_levels() {
            self.forward_level(level, &mut state)?;
        }
        for level in (0..self.num_levels()).rev() {
            self.backward_level(level, &mut state)?;
        }
        self.finish(&mut state)?;
        Ok(state)
    }
}

/// Late slack is required minus arrival; early slack is arrival minus required.
pub fn slack(arrival: CornerVector, required: CornerVector) -> CornerVector {
    CornerVector(std::array::from_fn(|c| match Condition::from_index(c).mode() {
        Mode::Late => required.0[c] - arrival.0[c],
        Mode::Early => arrival.0[c] - required.0[c],
    }))
}
