// SPDX-License-Identifier: Apache-2.0

//! Level-by-level smooth forward pass and reverse gradient pass.
//!
//! Cell output arrivals merge their fanin arcs with log-sum-exp; net members
//! add the path sum of edge delays to the root arrival. The backward pass
//! pulls sensitivities from later levels: a member collects its endpoint
//! term and the gradients of its fanout arcs, a root collects its members,
//! and each fanin arc of a root receives the root sensitivity scaled by the
//! arc's softmax weight.

use crate::netlist::{Condition, CornerVector, Design, NetRef, PinRef};
use crate::sta::propagate::Analysis;
use crate::sta::{StaError, TimingState};

use super::dd::Real;
use super::lse::lse_with;
use super::{GradConfig, GradientState, LossKind};

const LATE: [usize; 2] = [Condition::LateRise as usize, Condition::LateFall as usize];

/// Late `[rise, fall]` entries of a corner vector.
pub fn late_pair(v: CornerVector) -> [f64; 2] {
    [v.0[LATE[0]], v.0[LATE[1]]]
}

fn violation(stage: &'static str, pin: PinRef) -> StaError {
    StaError::ScheduleViolation { stage, pin }
}

/// Smooth arrivals of the root and members of `net`. `arc_delay(arc, e)`
/// and `edge_delay(pin, e)` supply the late delays; `weights`, when given,
/// receives the softmax weight of each fanin arc of the root.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward_net_with<R: Real>(
    analysis: &Analysis<'_>,
    net: NetRef,
    gamma: R,
    arc_delay: &dyn Fn(usize, usize) -> R,
    edge_delay: &dyn Fn(usize, usize) -> R,
    at: &mut [[R; 2]],
    ready: &mut [bool],
    mut weights: Option<&mut [[R; 2]]>,
) -> Result<(), StaError> {
    let design = analysis.design;
    let topo = design.net(net);
    let r = topo.root.index();
    if !design.pins[r].is_primary_input() {
        let fanin = &analysis.index.fanin_arcs[r];
        for &arc in fanin {
            let from = design.arc(arc).from;
            if !ready[from.index()] {
                return Err(violation("smooth forward", from));
            }
        }
        let mut xs = Vec::with_capacity(fanin.len());
        let mut ws = vec![R::zero(); fanin.len()];
        for e in 0..2 {
            xs.clear();
            xs.extend(
                fanin
                    .iter()
                    .map(|&arc| at[design.arc(arc).from.index()][e] + arc_delay(arc.index(), e)),
            );
            at[r][e] = lse_with(&xs, gamma, weights.is_some().then_some(&mut ws[..]));
            if let Some(w) = weights.as_deref_mut() {
                for (&arc, &wk) in fanin.iter().zip(&ws) {
                    w[arc.index()][e] = wk;
                }
            }
        }
        ready[r] = true;
    } else if !ready[r] {
        return Err(violation("smooth forward", topo.root));
    }
    let tree = &analysis.index.trees[net.index()];
    let mut delay: Vec<[R; 2]> = Vec::with_capacity(topo.members.len());
    for (pos, m) in topo.members.iter().enumerate() {
        let i = m.pin.index();
        let base = tree.parent[pos].map_or([R::zero(); 2], |p| delay[p as usize]);
        let d = [base[0] + edge_delay(i, 0), base[1] + edge_delay(i, 1)];
        at[i] = [at[r][0] + d[0], at[r][1] + d[1]];
        ready[i] = true;
        delay.push(d);
    }
    Ok(())
}

fn clamp<R: Real>(v: R, kind: LossKind, gamma: R) -> R {
    match kind {
        LossKind::Hinge => {
            if v > R::zero() {
                v
            } else {
                R::zero()
            }
        }
        LossKind::Softplus => {
            let (pos, neg_abs) = if v > R::zero() { (v, R::zero() - v) } else { (R::zero(), v) };
            pos + gamma * (R::one() + (neg_abs / gamma).exp()).ln()
        }
    }
}

fn clamp_grad(v: f64, kind: LossKind, gamma: f64) -> f64 {
    match kind {
        LossKind::Hinge => {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        LossKind::Softplus => {
            let z = v / gamma;
            if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let ez = z.exp();
                ez / (1.0 + ez)
            }
        }
    }
}

/// Sum over endpoints and late edges of the clamped violation.
pub(crate) fn loss_with<R: Real>(design: &Design, at: &[[R; 2]], cfg: &GradConfig) -> R {
    let gamma = R::from_f64(cfg.gamma);
    let mut sum = R::zero();
    for p in design.endpoints() {
        let rat = late_pair(design.endpoint_required(p));
        for e in 0..2 {
            sum = sum + clamp(at[p.index()][e] - R::from_f64(rat[e]), cfg.loss, gamma);
        }
    }
    sum
}

/// Loss from a full smooth forward pass with the given delays.
pub(crate) fn smooth_loss_with<R: Real>(
    analysis: &Analysis<'_>,
    cfg: &GradConfig,
    arc_delay: &dyn Fn(usize, usize) -> R,
    edge_delay: &dyn Fn(usize, usize) -> R,
) -> Result<R, StaError> {
    let design = analysis.design;
    let nan = R::from_f64(f64::NAN);
    let mut at = vec![[nan; 2]; design.pins.len()];
    let mut ready = vec![false; design.pins.len()];
    for (pin, arrival) in design.primary_inputs() {
        at[pin.index()] = late_pair(arrival).map(R::from_f64);
        ready[pin.index()] = true;
    }
    let gamma = R::from_f64(cfg.gamma);
    for level in &analysis.schedule.levels {
        for &net in level {
            forward_net_with(analysis, net, gamma, arc_delay, edge_delay, &mut at, &mut ready, None)?;
        }
    }
    Ok(loss_with(design, &at, cfg))
}

/// Smooth arrivals for the nets of one level. The hard forward pass must
/// already have evaluated the drivers of these nets.
pub fn forward_lse_level(
    analysis: &Analysis<'_>,
    level: usize,
    state: &TimingState,
    g: &mut GradientState,
) -> Result<(), StaError> {
    for &net in &analysis.schedule.levels[level] {
        let root = analysis.design.net(net).root;
        if !state.arrival_ready[root.index()] {
            return Err(violation("smooth forward", root));
        }
    }
    let arc_delay = |arc: usize, e: usize| state.arc_delay[arc].0[LATE[e]];
    let edge_delay = |pin: usize, e: usize| state.edge_delay[pin].0[LATE[e]];
    forward_lse_level_with(analysis, level, &arc_delay, &edge_delay, g)
}

/// [`forward_lse_level`] with late `[rise, fall]` delays supplied by the caller.
pub fn forward_lse_level_with(
    analysis: &Analysis<'_>,
    level: usize,
    arc_delay: &dyn Fn(usize, usize) -> f64,
    edge_delay: &dyn Fn(usize, usize) -> f64,
    g: &mut GradientState,
) -> Result<(), StaError> {
    let gamma = g.config.gamma;
    for &net in &analysis.schedule.levels[level] {
        forward_net_with(
            analysis,
            net,
            gamma,
            arc_delay,
            edge_delay,
            &mut g.lse_arrival,
            &mut g.forward_ready,
            Some(&mut g.arc_weight),
        )?;
    }
    Ok(())
}

pub fn forward_lse_arrival(
    analysis: &Analysis<'_>,
    state: &TimingState,
    cfg: &GradConfig,
) -> Result<GradientState, StaError> {
    let mut g = GradientState::new(analysis.design, *cfg);
    for level in 0..analysis.num_levels() {
        forward_lse_level(analysis, level, state, &mut g)?;
    }
    Ok(g)
}

/// Loss derivative at `pin` from its own endpoint term and fanout arcs.
fn pin_sensitivity(analysis: &Analysis<'_>, g: &GradientState, pin: PinRef) -> Result<[f64; 2], StaError> {
    let design = analysis.design;
    let mut s = [0.0; 2];
    if design.pins[pin.index()].is_endpoint {
        let rat = late_pair(design.endpoint_required(pin));
        for e in 0..2 {
            s[e] += clamp_grad(g.lse_arrival[pin.index()][e] - rat[e], g.config.loss, g.config.gamma);
        }
    }
    for &arc in &analysis.index.fanout_arcs[pin.index()] {
        let to = design.arc(arc).to;
        if !g.backward_ready[to.index()] {
            return Err(violation("gradient backward", to));
        }
        for e in 0..2 {
            s[e] += g.arc_grad[arc.index()][e];
        }
    }
    Ok(s)
}

/// Computes the loss; requires a complete forward pass.
pub fn begin_backward(analysis: &Analysis<'_>, g: &mut GradientState) -> Result<(), StaError> {
    let design = analysis.design;
    if let Some(p) = design.endpoints().find(|p| !g.forward_ready[p.index()]) {
        return Err(violation("gradient backward", p));
    }
    g.loss = loss_with(design, &g.lse_arrival, &g.config);
    Ok(())
}

pub fn backward_grad_level(analysis: &Analysis<'_>, level: usize, g: &mut GradientState) -> Result<(), StaError> {
    let design = analysis.design;
    for &net in &analysis.schedule.levels[level] {
        let topo = design.net(net);
        let tree = &analysis.index.trees[net.index()];
        for m in &topo.members {
            g.pin_grad[m.pin.index()] = pin_sensitivity(analysis, g, m.pin)?;
            g.backward_ready[m.pin.index()] = true;
        }
        let mut subtree = vec![[0.0f64; 2]; topo.members.len()];
        for pos in (0..topo.members.len()).rev() {
            let mut acc = g.pin_grad[topo.members[pos].pin.index()];
            for &ch in &tree.children[pos] {
                for e in 0..2 {
                    acc[e] += subtree[ch as usize][e];
                }
            }
            subtree[pos] = acc;
            g.edge_grad[topo.members[pos].pin.index()] = acc;
        }
        let mut root = pin_sensitivity(analysis, g, topo.root)?;
        for &ch in &tree.root_children {
            for e in 0..2 {
                root[e] += subtree[ch as usize][e];
            }
        }
        let r = topo.root.index();
        g.pin_grad[r] = root;
        g.backward_ready[r] = true;
        for &arc in &analysis.index.fanin_arcs[r] {
            let w = g.arc_weight[arc.index()];
            g.arc_grad[arc.index()] = [w[0] * root[0], w[1] * root[1]];
        }
    }
    Ok(())
}

/// Sensitivities of pins outside every net.
pub fn finish_backward(analysis: &Analysis<'_>, g: &mut GradientState) -> Result<(), StaError> {
    for i in 0..analysis.design.pins.len() {
        if analysis.index.member_of[i].is_some() || analysis.index.drives[i].is_some() {
            continue;
        }
        g.pin_grad[i] = pin_sensitivity(analysis, g, PinRef::new(i))?;
        g.backward_ready[i] = true;
    }
    Ok(())
}

pub fn backward_tns_grad(analysis: &Analysis<'_>, g: &mut GradientState) -> Result<(), StaError> {
    begin_backward(analysis, g)?;
    for level in (0..analysis.num_levels()).rev() {
        backward_grad_level(analysis, level, g)?;
    }
    finish_backward(analysis, g)
}

/// Smooth forward and gradient passes over a completed hard analysis.
pub fn run_gradient(analysis: &Analysis<'_>, state: &TimingState, cfg: &GradConfig) -> Result<GradientState, StaError> {
    let mut g = forward_lse_arrival(analysis, state, cfg)?;
    backward_tns_grad(analysis, &mut g)?;
    Ok(g)
}
