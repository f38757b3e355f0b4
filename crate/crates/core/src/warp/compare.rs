// SPDX-License-Identifier: Apache-2.0

//! Value checks against the reference engine and per-scheme comparison.

use serde::{Deserialize, Serialize};

use crate::netlist::CornerVector;
use crate::par::ExecMode;
use crate::sta::propagate::Analysis;
use crate::sta::{ReductionOrder, StaConfig, TimingState};

use super::cost::CostReport;
use super::exec::{execute_scheduled, ExecError, ExecOptions};
use super::{assign, CostModel, Scheme, WarpGeometry};

/// Default relative tolerance for value checks.
pub const VALUE_TOLERANCE: f64 = 1e-6;

/// Largest disagreement between two timing states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDiff {
    /// Bitwise equality of every compared value.
    pub exact: bool,
    pub max_rel_error: f64,
    pub worst_field: Option<String>,
    pub worst_pin: Option<usize>,
}

impl StateDiff {
    pub fn within(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

fn fields(s: &TimingState) -> [(&'static str, &[CornerVector]); 7] {
    [
        ("load", &s.load),
        ("delay", &s.net_delay),
        ("impulse", &s.impulse),
        ("slew", &s.slew),
        ("arrival", &s.arrival),
        ("required", &s.required),
        ("slack", &s.slack),
    ]
}

/// Compares `other` against `reference` field by field. The relative error
/// of a value pair is `|a - b| / max(|a|, |b|, floor)`, where `floor` is
/// 1e-3 of the largest finite magnitude of that field in the reference, so
/// values near zero are not judged against their own tiny magnitude.
/// Matching infinities and NaNs count as equal.
pub fn compare_states(reference: &TimingState, other: &TimingState) -> StateDiff {
    let mut diff = StateDiff {
        exact: true,
        max_rel_error: 0.0,
        worst_field: None,
        worst_pin: None,
    };
    for ((name, a), (_, b)) in fields(reference).into_iter().zip(fields(other)) {
        let scale = a
            .iter()
            .flat_map(|v| v.0)
            .filter(|x| x.is_finite())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
        if a.len() != b.len() {
            diff.exact = false;
            diff.max_rel_error = f64::INFINITY;
            diff.worst_field = Some(name.to_string());
            continue;
        }
        for (pin, (va, vb)) in a.iter().zip(b).enumerate() {
            for c in 0..4 {
                let (x, y) = (va.0[c], vb.0[c]);
                if x.to_bits() != y.to_bits() {
                    diff.exact = false;
                }
                let err = if x == y || (x.is_nan() && y.is_nan()) {
                    0.0
                } else if !x.is_finite() || !y.is_finite() {
                    f64::INFINITY
                } else {
                    (x - y).abs() / x.abs().max(y.abs()).max(floor)
                };
                if err > diff.max_rel_error {
                    diff.max_rel_error = err;
                    diff.worst_field = Some(name.to_string());
                    diff.worst_pin = Some(pin);
                }
            }
        }
    }
    diff
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub cost: CostReport,
    pub diff: StateDiff,
    pub value_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<SchemeRun>,
}

impl Comparison {
    pub fn run(&self, scheme: Scheme) -> Option<&SchemeRun> {
        self.runs.iter().find(|r| r.scheme == scheme)
    }
}

/// Runs all three schemes and checks each against the reference engine
/// configured with the same reduction order.
pub fn compare_schemes(
    analysis: &Analysis<'_>,
    geometry: &WarpGeometry,
    model: &CostModel,
    mode: ExecMode,
) -> Result<Comparison, ExecError> {
    compare_schemes_with(analysis, geometry, model, &ExecOptions { mode, fault: None })
}

/// [`compare_schemes`] with explicit execution options, including faults.
pub fn compare_schemes_with(
    analysis: &Analysis<'_>,
    geometry: &WarpGeometry,
    model: &CostModel,
    options: &ExecOptions,
) -> Result<Comparison, ExecError> {
    let reference = analysis.run(&StaConfig {
        reduction: ReductionOrder::Tree {
            lanes: geometry.y_dim as usize,
        },
    })?;
    let runs = Scheme::ALL
        .iter()
        .map(|&scheme| {
            let assignment = assign(analysis, scheme, geometry);
            let (state, cost) = execute_scheduled(analysis, &assignment, model, options)?;
            let diff = compare_states(&reference, &state);
            Ok(SchemeRun {
                scheme,
                cost,
                value_check: diff.within(VALUE_TOLERANCE),
                diff,
            })
        })
        .collect::<Result<Vec<_>, ExecError>>()?;
    Ok(Comparison { runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{generate_design, FanoutDistribution, GeneratorConfig};

    #[test]
    fn identical_states_are_exact() {
        let mut s = TimingState::new(2, 0);
        s.load[0] = CornerVector::splat(1.0);
        s.required[1] = CornerVector::splat(f64::INFINITY);
        let d = compare_states(&s, &s.clone());
        assert!(d.exact);
        assert_eq!(d.max_rel_error, 0.0);
    }

    #[test]
    fn relative_error_uses_field_floor() {
        let mut a = TimingState::new(2, 0);
        a.load[0] = CornerVector::splat(1000.0);
        a.load[1] = CornerVector::splat(0.0);
        let mut b = a.clone();
        b.load[1] = CornerVector::splat(1e-9);
        // Floor is 1e-3 * 1000 = 1, so the error is 1e-9.
        let d = compare_states(&a, &b);
        assert!(!d.exact);
        assert!((d.max_rel_error - 1e-9).abs() < 1e-20);
        assert_eq!(d.worst_pin, Some(1));
        b.load[0] = CornerVector::splat(1001.0);
        let d = compare_states(&a, &b);
        assert!((d.max_rel_error - 1.0 / 1001.0).abs() < 1e-15);
        assert_eq!(d.worst_field.as_deref(), Some("load"));
    }

    #[test]
    fn infinity_mismatch_is_infinite_error() {
        let a = TimingState::new(1, 0);
        let mut b = a.clone();
        b.required[0] = CornerVector::splat(f64::INFINITY);
        assert_eq!(compare_states(&a, &b).max_rel_error, f64::INFINITY);
    }

    #[test]
    fn power_law_ordering() {
        let cfg = GeneratorConfig::new(2000, FanoutDistribution::PowerLaw { alpha: 2.0, max: 512 }, 10, 7);
        let d = generate_design(&cfg).unwrap();
        let a = Analysis::new(&d).unwrap();
        let c = compare_schemes(&a, &WarpGeometry::default(), &CostModel::default(), ExecMode::default()).unwrap();
        let get = |s| c.run(s).unwrap();
        let (net, pin, cte) = (get(Scheme::NetBased), get(Scheme::PinBased), get(Scheme::Cte));
        assert!(c.runs.iter().all(|r| r.value_check && r.diff.exact));
        assert!(cte.cost.lane_utilization >= pin.cost.lane_utilization);
        assert!(pin.cost.lane_utilization > net.cost.lane_utilization);
        assert!(pin.cost.total_cycles < cte.cost.total_cycles);
        assert!(cte.cost.total_cycles < net.cost.total_cycles);
        assert_eq!(net.cost.useful_lane_cycles, cte.cost.useful_lane_cycles);
    }
}
