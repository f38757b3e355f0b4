// SPDX-License-Identifier: Apache-2.0

use sta_core::netlist::{generate_design, FanoutDistribution, GeneratorConfig};
use sta_core::par::ExecMode;
use sta_core::sta::{Analysis, ReductionOrder, StaConfig};
use sta_core::warp::{
    assign, compare_schemes, compare_states, execute_scheduled, CostModel, ExecOptions, Fault, Scheme, WarpGeometry,
};

fn design(i: u64, cells: usize) -> sta_core::netlist::Design {
    let dist = match i % 3 {
        0 => FanoutDistribution::Fixed { k: 3 },
        1 => FanoutDistribution::Uniform { lo: 1, hi: 16 },
        _ => FanoutDistribution::PowerLaw { alpha: 2.0, max: 256 },
    };
    let cfg = GeneratorConfig {
        rc_tree_fraction: 0.25,
        ..GeneratorConfig::new(cells, dist, 4 + i as usize % 12, i)
    };
    generate_design(&cfg).unwrap()
}

#[test]
fn scheduled_engines_match_the_oracle() {
    let geometry = WarpGeometry::default();
    for i in 0..12 {
        let d = design(i, 400);
        let a = Analysis::new(&d).unwrap();
        let c = compare_schemes(&a, &geometry, &CostModel::default(), ExecMode::default()).unwrap();
        assert_eq!(c.runs.len(), 3);
        for r in &c.runs {
            assert!(r.diff.exact, "design {i} {:?}: {:?}", r.scheme, r.diff);
        }
    }
}

#[test]
fn sequential_oracle_is_within_tolerance() {
    let geometry = WarpGeometry::default();
    let d = design(2, 600);
    let a = Analysis::new(&d).unwrap();
    let seq = a
        .run(&StaConfig {
            reduction: ReductionOrder::Sequential,
        })
        .unwrap();
    for scheme in Scheme::ALL {
        let (s, _) = execute_scheduled(&a, &assign(&a, scheme, &geometry), &CostModel::default(), &ExecOptions::default())
            .unwrap();
        assert!(compare_states(&seq, &s).within(1e-6), "{scheme:?}");
    }
}

#[test]
fn dropped_reduction_lane_is_caught() {
    let geometry = WarpGeometry::default();
    let d = design(5, 300);
    let a = Analysis::new(&d).unwrap();
    let reference = a
        .run(&StaConfig {
            reduction: ReductionOrder::Tree {
                lanes: geometry.y_dim as usize,
            },
        })
        .unwrap();
    let options = ExecOptions {
        fault: Some(Fault::DropReductionLane { lane: 1 }),
        ..ExecOptions::default()
    };
    let (s, _) = execute_scheduled(&a, &assign(&a, Scheme::PinBased, &geometry), &CostModel::default(), &options).unwrap();
    assert!(!compare_states(&reference, &s).within(1e-6));
}

#[test]
fn skewed_fanout_ranks_schemes() {
    let cfg = GeneratorConfig::new(3000, FanoutDistribution::PowerLaw { alpha: 2.0, max: 512 }, 10, 11);
    let d = generate_design(&cfg).unwrap();
    let a = Analysis::new(&d).unwrap();
    let c = compare_schemes(&a, &WarpGeometry::default(), &CostModel::default(), ExecMode::default()).unwrap();
    let get = |s| c.run(s).unwrap().cost.clone();
    let (net, pin, cte) = (get(Scheme::NetBased), get(Scheme::PinBased), get(Scheme::Cte));
    assert!(pin.total_cycles < cte.total_cycles && cte.total_cycles < net.total_cycles);
    assert!(cte.lane_utilization >= pin.lane_utilization && pin.lane_utilization > net.lane_utilization);
}
