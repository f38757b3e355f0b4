// SPDX-License-Identifier: Apache-2.0

//! Timing report: one record per (pin, condition) plus a summary.

use serde::{Deserialize, Serialize};

use crate::netlist::Condition;

use super::{tns, wns, Analysis, TimingState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinRecord {
    pub pin: String,
    pub condition: String,
    pub is_endpoint: bool,
    #[serde(with = "crate::serde_f64")]
    pub load: f64,
    #[serde(with = "crate::serde_f64")]
    pub delay: f64,
    #[serde(with = "crate::serde_f64")]
    pub impulse: f64,
    #[serde(with = "crate::serde_f64")]
    pub slew: f64,
    #[serde(with = "crate::serde_f64")]
    pub arrival: f64,
    #[serde(with = "crate::serde_f64")]
    pub required: f64,
    #[serde(with = "crate::serde_f64")]
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    #[serde(with = "crate::serde_f64")]
    pub tns: f64,
    #[serde(with = "crate::serde_f64")]
    pub tns_rise: f64,
    #[serde(with = "crate::serde_f64")]
    pub tns_fall: f64,
    #[serde(with = "crate::serde_f64")]
    pub wns: f64,
    pub level_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub records: Vec<PinRecord>,
    pub summary: ReportSummary,
}

impl TimingReport {
    pub fn build(analysis: &Analysis<'_>, state: &TimingState) -> Self {
        let design = analysis.design;
        let mut records = Vec::with_capacity(design.pins.len() * 4);
        for (i, pin) in design.pins.iter().enumerate() {
            for cond in Condition::ALL {
                let c = cond.index();
                records.push(PinRecord {
                    pin: pin.name.clone(),
                    condition: cond.name().to_string(),
                    is_endpoint: pin.is_endpoint,
                    load: state.load[i].0[c],
                    delay: state.net_delay[i].0[c],
                    impulse: state.impulse[i].0[c],
                    slew: state.slew[i].0[c],
                    arrival: state.arrival[i].0[c],
                    required: state.required[i].0[c],
                    slack: state.slack[i].0[c],
                });
            }
        }
        let t = tns(design, state);
        Self {
            records,
            summary: ReportSummary {
                tns: t.total,
                tns_rise: t.rise,
                tns_fall: t.fall,
                wns: wns(design, state),
                level_count: analysis.num_levels(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
