// SPDX-License-Identifier: Apache-2.0

//! Central finite differences of the smooth loss, evaluated in
//! double-double precision, against the analytic gradients.

use serde::{Deserialize, Serialize};

use crate::par::{self, ExecMode};
use crate::sta::propagate::Analysis;
use crate::sta::{StaError, TimingState};

use super::dd::{DoubleDouble, Real};
use super::smooth::{run_gradient, smooth_loss_with};
use super::{Coordinate, GradConfig, GradientState};

/// Gradients at or below this magnitude are compared in absolute terms only.
pub const GRADIENT_FLOOR: f64 = 1e-8;
/// Relative error above which a check fails.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub epsilon: f64,
    pub checked: usize,
    /// Worst relative error over coordinates whose analytic or numeric
    /// gradient exceeds [`GRADIENT_FLOOR`].
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst: Option<Coordinate>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Halving the step moves the worst numeric derivative by a sizeable
    /// part of its error: the difference quotient has not converged, so the
    /// step rather than the gradient is at fault.
    pub epsilon_dominated: bool,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRADIENT_TOLERANCE
    }
}

fn late_index(e: usize) -> usize {
    2 + e
}

fn numeric(
    analysis: &Analysis<'_>,
    state: &TimingState,
    cfg: &GradConfig,
    c: Coordinate,
    epsilon: f64,
) -> Result<f64, StaError> {
    let eval = |shift: f64| -> Result<DoubleDouble, StaError> {
        let arc = |arc: usize, e: usize| {
            let v = DoubleDouble::new(state.arc_delay[arc].0[late_index(e)]);
            if c == (Coordinate::Arc { arc, edge: e }) {
                v + DoubleDouble::new(shift)
            } else {
                v
            }
        };
        let edge = |pin: usize, e: usize| {
            let v = DoubleDouble::new(state.edge_delay[pin].0[late_index(e)]);
            if c == (Coordinate::NetEdge { pin, edge: e }) {
                v + DoubleDouble::new(shift)
            } else {
                v
            }
        };
        smooth_loss_with(analysis, cfg, &arc, &edge)
    };
    let plus = eval(epsilon)?;
    let minus = eval(-epsilon)?;
    Ok(((plus - minus) / DoubleDouble::new(2.0 * epsilon)).to_f64())
}

fn rel_error(analytic: f64, numeric: f64) -> Option<f64> {
    let scale = analytic.abs().max(numeric.abs());
    (scale > GRADIENT_FLOOR).then(|| (analytic - numeric).abs() / scale)
}

/// Checks every coordinate; see [`finite_diff_check_at`].
pub fn finite_diff_check(
    analysis: &Analysis<'_>,
    state: &TimingState,
    cfg: &GradConfig,
    epsilon: f64,
) -> Result<FdReport, StaError> {
    let coords = GradientState::coordinates(analysis.design);
    finite_diff_check_at(analysis, state, cfg, epsilon, &coords)
}

/// Perturbs each listed delay by `±epsilon`, recomputes the loss with a full
/// smooth forward pass and compares the central difference with the
/// analytic gradient.
pub fn finite_diff_check_at(
    analysis: &Analysis<'_>,
    state: &TimingState,
    cfg: &GradConfig,
    epsilon: f64,
    coords: &[Coordinate],
) -> Result<FdReport, StaError> {
    let g = run_gradient(analysis, state, cfg)?;
    let numerics = par::map(ExecMode::default(), coords, |&c| numeric(analysis, state, cfg, c, epsilon));
    let mut report = FdReport {
        epsilon,
        checked: coords.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        epsilon_dominated: false,
    };
    for (&c, num) in coords.iter().zip(numerics) {
        let num = num?;
        let an = g.gradient(c);
        report.max_abs_error = report.max_abs_error.max((an - num).abs());
        if let Some(rel) = rel_error(an, num) {
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(c);
                report.worst_analytic = an;
                report.worst_numeric = num;
            }
        }
    }
    if let (Some(c), true) = (report.worst, report.max_rel_error > GRADIENT_TOLERANCE) {
        let half = numeric(analysis, state, cfg, c, epsilon / 2.0)?;
        let error = (report.worst_numeric - report.worst_analytic).abs();
        report.epsilon_dominated = (report.worst_numeric - half).abs() >= 0.25 * error;
    }
    Ok(report)
}
