// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic circuits.
//!
//! Cell `i` sits in layer `i mod depth_target`. Every cell outside layer 0
//! takes one input from the cell at the same position in the previous layer,
//! which fixes the logic depth. Layer-0 cells take a primary input. The rest
//! of each cell's sampled fanout goes to new input pins on random cells in
//! later layers, or to primary outputs (always from the last layer).
//!
//! Independent random streams drive topology, parasitics, tables and
//! constraints, so changing one family of values leaves the others intact.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CornerVector, Design, Lut2D, LutRef, NetMember, NetTopology, Pin, PinRef};

const STREAM_TOPOLOGY: u64 = 1;
const STREAM_PARASITICS: u64 = 2;
const STREAM_TABLES: u64 = 3;
const STREAM_CONSTRAINTS: u64 = 4;

const CELL_TYPES: usize = 8;
/// Probability that a spare fanout of a non-final layer becomes a primary output.
const OUTPUT_PROBABILITY: f64 = 0.05;
/// Default clock period as a fraction of the worst late arrival.
const DEFAULT_TIGHTNESS: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FanoutDistribution {
    Fixed { k: u32 },
    Uniform { lo: u32, hi: u32 },
    PowerLaw { alpha: f64, max: u32 },
}

impl FanoutDistribution {
    pub fn max_fanout(&self) -> u32 {
        match *self {
            FanoutDistribution::Fixed { k } => k,
            FanoutDistribution::Uniform { hi, .. } => hi,
            FanoutDistribution::PowerLaw { max, .. } => max,
        }
    }

    /// Probability of each fanout value `1..=max_fanout()`.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.max_fanout() as usize;
        let mut p = vec![0.0; max];
        match *self {
            FanoutDistribution::Fixed { k } => p[k as usize - 1] = 1.0,
            FanoutDistribution::Uniform { lo, hi } => {
                let w = 1.0 / f64::from(hi - lo + 1);
                for v in lo..=hi {
                    p[v as usize - 1] = w;
                }
            }
            FanoutDistribution::PowerLaw { alpha, .. } => {
                for (i, slot) in p.iter_mut().enumerate() {
                    *slot = ((i + 1) as f64).powf(-alpha);
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
            }
        }
        p
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        let ok = match *self {
            FanoutDistribution::Fixed { k } => k >= 1,
            FanoutDistribution::Uniform { lo, hi } => lo >= 1 && lo <= hi,
            FanoutDistribution::PowerLaw { alpha, max } => alpha.is_finite() && alpha > 0.0 && max >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(GeneratorError::InvalidConfig(format!(
                "invalid fanout distribution {self:?}"
            )))
        }
    }
}

/// Points per LUT axis when a config does not say.
pub const DEFAULT_LUT_GRID_SIZE: usize = 5;

fn default_lut_grid_size() -> usize {
    DEFAULT_LUT_GRID_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_cells: usize,
    pub fanout_distribution: FanoutDistribution,
    pub depth_target: usize,
    #[serde(default = "default_lut_grid_size")]
    pub lut_grid_size: usize,
    pub seed: u64,
    /// Fraction of nets built as random RC trees instead of stars.
    #[serde(default)]
    pub rc_tree_fraction: f64,
    /// Clock period in seconds; by default 90% of the worst late arrival.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_period: Option<f64>,
}

impl GeneratorConfig {
    pub fn new(num_cells: usize, fanout_distribution: FanoutDistribution, depth_target: usize, seed: u64) -> Self {
        Self {
            num_cells,
            fanout_distribution,
            depth_target,
            lut_grid_size: DEFAULT_LUT_GRID_SIZE,
            seed,
            rc_tree_fraction: 0.0,
            clock_period: None,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let invalid = |m: &str| Err(GeneratorError::InvalidConfig(m.to_string()));
        if self.num_cells == 0 {
            return invalid("num_cells must be positive");
        }
        if self.depth_target == 0 {
            return invalid("depth_target must be positive");
        }
        if self.lut_grid_size == 0 {
            return invalid("lut_grid_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.rc_tree_fraction) {
            return invalid("rc_tree_fraction must lie in [0, 1]");
        }
        if let Some(t) = self.clock_period {
            if !(t.is_finite() && t > 0.0) {
                return invalid("clock_period must be positive");
            }
        }
        self.fanout_distribution.validate()?;
        if self.depth_target > self.num_cells {
            return Err(GeneratorError::Infeasible {
                depth_target: self.depth_target,
                num_cells: self.num_cells,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("depth target {depth_target} exceeds the number of cells {num_cells}")]
    Infeasible { depth_target: usize, num_cells: usize },
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy)]
enum Sink {
    Input { cell: usize, slot: usize },
    Output,
}

fn linspace(hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}

/// Table of `base + a * slew + b * load`, each entry perturbed by up to 5%.
fn characterize(rng: &mut ChaCha8Rng, grid: usize, base: f64, a: f64, b: f64) -> Lut2D {
    let slew_axis = linspace(200e-12, grid);
    let load_axis = linspace(200e-15, grid);
    let table = slew_axis
        .iter()
        .map(|&s| {
            load_axis
                .iter()
                .map(|&l| (base + a * s + b * l) * rng.gen_range(0.95..1.05))
                .collect()
        })
        .collect();
    Lut2D {
        slew_axis,
        load_axis,
        table,
    }
}

/// Rise and fall values differing by up to 10%; early equals late.
fn rise_fall(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> CornerVector {
    let rise = rng.gen_range(lo..hi);
    let fall = rise * rng.gen_range(0.9..1.1);
    CornerVector::rise_fall(rise, fall)
}

pub fn generate_design(cfg: &GeneratorConfig) -> Result<Design, GeneratorError> {
    cfg.validate()?;
    let cells = cfg.num_cells;
    let depth = cfg.depth_target;
    let mut topo = stream(cfg.seed, STREAM_TOPOLOGY);
    let mut para = stream(cfg.seed, STREAM_PARASITICS);
    let mut tables = stream(cfg.seed, STREAM_TABLES);
    let mut cons = stream(cfg.seed, STREAM_CONSTRAINTS);

    // Cells ordered by layer; later layers form a suffix of this list.
    let layer = |i: usize| i % depth;
    let mut by_layer: Vec<usize> = (0..cells).collect();
    by_layer.sort_by_key(|&i| (layer(i), i));
    let layer_start: Vec<usize> = (0..=depth)
        .map(|l| by_layer.partition_point(|&i| layer(i) < l))
        .collect();

    let weights = cfg.fanout_distribution.probabilities();
    let sampler = WeightedIndex::new(&weights).expect("fanout weights are positive");
    let fanout: Vec<usize> = (0..cells).map(|_| sampler.sample(&mut topo) + 1).collect();
    let cell_type: Vec<usize> = (0..cells).map(|_| topo.gen_range(0..CELL_TYPES)).collect();

    let mut inputs = vec![0usize; cells];
    let mut sinks: Vec<Vec<Sink>> = vec![Vec::new(); cells];
    for c in 0..cells {
        if layer(c) == 0 {
            inputs[c] += 1;
        }
    }
    // Spine: position j of layer l feeds position j of layer l + 1.
    for l in 1..depth {
        for j in 0..layer_start[l + 1] - layer_start[l] {
            let src = by_layer[layer_start[l - 1] + j];
            let dst = by_layer[layer_start[l] + j];
            sinks[src].push(Sink::Input {
                cell: dst,
                slot: inputs[dst],
            });
            inputs[dst] += 1;
        }
    }
    for c in 0..cells {
        let spare = fanout[c] - sinks[c].len();
        let later = layer_start[layer(c) + 1];
        for _ in 0..spare {
            let to_output = later == cells || topo.gen_bool(OUTPUT_PROBABILITY);
            let sink = if to_output {
                Sink::Output
            } else {
                let dst = by_layer[topo.gen_range(later..cells)];
                let slot = inputs[dst];
                inputs[dst] += 1;
                Sink::Input { cell: dst, slot }
            };
            sinks[c].push(sink);
        }
    }

    let mut design = Design::empty(1.0);
    let mut luts = Vec::with_capacity(CELL_TYPES);
    for _ in 0..CELL_TYPES {
        let grid = cfg.lut_grid_size;
        let d0 = tables.gen_range(10e-12..30e-12);
        let a = tables.gen_range(0.05..0.2);
        let b = tables.gen_range(500.0..2000.0);
        let s0 = tables.gen_range(5e-12..20e-12);
        let sa = tables.gen_range(0.1..0.5);
        let sb = tables.gen_range(1000.0..4000.0);
        let f = tables.gen_range(0.9..1.1);
        let delay_rise = design.add_lut(characterize(&mut tables, grid, d0, a, b));
        let delay_fall = design.add_lut(characterize(&mut tables, grid, d0 * f, a, b * f));
        let slew_rise = design.add_lut(characterize(&mut tables, grid, s0, sa, sb));
        let slew_fall = design.add_lut(characterize(&mut tables, grid, s0 * f, sa, sb * f));
        let per_cond = |r: LutRef, f: LutRef| [r, f, r, f];
        luts.push((per_cond(delay_rise, delay_fall), per_cond(slew_rise, slew_fall)));
    }

    let mut input_pins: Vec<Vec<PinRef>> = Vec::with_capacity(cells);
    let mut output_pins: Vec<PinRef> = Vec::with_capacity(cells);
    for c in 0..cells {
        let pins: Vec<PinRef> = (0..inputs[c])
            .map(|j| design.add_pin(Pin::named(format!("c{c}/A{j}"))))
            .collect();
        output_pins.push(design.add_pin(Pin::named(format!("c{c}/Y"))));
        let cell = design.add_cell(format!("c{c}"));
        let (delay, slew) = luts[cell_type[c]];
        for &p in &pins {
            design.add_arc(cell, p, output_pins[c], delay, slew);
        }
        input_pins.push(pins);
    }
    for c in 0..cells {
        if layer(c) == 0 {
            let late = rise_fall(&mut cons, 0.0, 10e-12);
            let early = late.map(|v| v * 0.9);
            let arrival = CornerVector([early.0[0], early.0[1], late.0[2], late.0[3]]);
            let pin = &mut design.pins[input_pins[c][0].index()];
            pin.arrival = Some(arrival);
            pin.slew = Some(rise_fall(&mut cons, 5e-12, 20e-12));
        }
    }

    let mut outputs = 0usize;
    for c in 0..cells {
        let root = output_pins[c];
        let tree = para.gen_bool(cfg.rc_tree_fraction);
        let mut members: Vec<NetMember> = Vec::with_capacity(sinks[c].len());
        for sink in &sinks[c] {
            let pin = match *sink {
                Sink::Input { cell, slot } => input_pins[cell][slot],
                Sink::Output => {
                    outputs += 1;
                    design.add_pin(Pin {
                        is_endpoint: true,
                        ..Pin::named(format!("po{}", outputs - 1))
                    })
                }
            };
            let parent = if tree && !members.is_empty() {
                let k = para.gen_range(0..=members.len());
                if k == 0 {
                    root
                } else {
                    members[k - 1].pin
                }
            } else {
                root
            };
            members.push(NetMember {
                pin,
                parent,
                res: rise_fall(&mut para, 20.0, 200.0),
                cap: rise_fall(&mut para, 0.5e-15, 2e-15),
            });
        }
        let root_cap = rise_fall(&mut para, 0.5e-15, 2e-15);
        design.add_net(NetTopology {
            root,
            root_cap,
            members,
        });
    }

    design.clock_period = match cfg.clock_period {
        Some(t) => t,
        None => default_clock(&design),
    };
    Ok(design)
}

fn default_clock(design: &Design) -> f64 {
    use crate::sta::{run_reference, StaConfig};
    let (_, state) = run_reference(design, &StaConfig::default()).expect("generated design is valid");
    let worst = design
        .endpoints()
        .map(|p| state.arrival[p.index()].0[2].max(state.arrival[p.index()].0[3]))
        .fold(0.0f64, f64::max);
    if worst > 0.0 {
        worst * DEFAULT_TIGHTNESS
    } else {
        1e-9
    }
}
