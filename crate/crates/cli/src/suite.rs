// SPDX-License-Identifier: Apache-2.0

//! Benchmark suites: a grid of generator settings with repetitions whose
//! seeds derive from the suite seed.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sta_core::netlist::{FanoutDistribution, GeneratorConfig, DEFAULT_LUT_GRID_SIZE};
use sta_core::warp::{CostModel, WarpGeometry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub label: String,
    pub num_cells: usize,
    pub fanout_distribution: FanoutDistribution,
    pub depth_target: usize,
    #[serde(default = "default_grid")]
    pub lut_grid_size: usize,
    #[serde(default)]
    pub rc_tree_fraction: f64,
    pub repetitions: usize,
}

fn default_grid() -> usize {
    DEFAULT_LUT_GRID_SIZE
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientSettings {
    /// Smoothness as a fraction of the clock period.
    pub gamma_fraction: f64,
    /// Finite-difference step as a fraction of the clock period.
    pub epsilon_fraction: f64,
    /// Coordinates checked per design; 0 checks all of them.
    pub check_sample: usize,
}

impl Default for GradientSettings {
    fn default() -> Self {
        Self {
            gamma_fraction: 0.01,
            epsilon_fraction: 1e-6,
            check_sample: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSettings {
    pub granularity: usize,
    /// Gradient kernel cost relative to the timing kernel of the same level.
    pub grad_scale: f64,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            granularity: sta_core::fusion::DEFAULT_GRANULARITY,
            grad_scale: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSuite {
    pub name: String,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
    #[serde(default)]
    pub geometry: WarpGeometry,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub gradient: GradientSettings,
    #[serde(default)]
    pub fusion: FusionSettings,
}

/// One design of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub row: usize,
    pub entry: usize,
    pub repetition: usize,
    pub label: String,
    pub generator: GeneratorConfig,
}

/// Seed of repetition `rep` of entry `entry`.
pub fn derive_seed(suite_seed: u64, entry: usize, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(suite_seed.to_le_bytes());
    h.update((entry as u64).to_le_bytes());
    h.update((rep as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

impl BenchmarkSuite {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.entries.is_empty(), "suite has no entries");
        for e in &self.entries {
            anyhow::ensure!(e.repetitions >= 1, "entry {} needs at least one repetition", e.label);
        }
        self.geometry.validate().map_err(anyhow::Error::msg)?;
        anyhow::ensure!(
            self.gradient.gamma_fraction > 0.0 && self.gradient.epsilon_fraction > 0.0,
            "gradient fractions must be positive"
        );
        anyhow::ensure!(self.fusion.grad_scale >= 0.0, "grad_scale must be non-negative");
        for row in self.rows() {
            row.generator.validate()?;
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<SuiteRow> {
        let mut rows = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            for rep in 0..e.repetitions {
                let generator = GeneratorConfig {
                    lut_grid_size: e.lut_grid_size,
                    rc_tree_fraction: e.rc_tree_fraction,
                    ..GeneratorConfig::new(
                        e.num_cells,
                        e.fanout_distribution.clone(),
                        e.depth_target,
                        derive_seed(self.seed, i, rep),
                    )
                };
                rows.push(SuiteRow {
                    row: rows.len(),
                    entry: i,
                    repetition: rep,
                    label: e.label.clone(),
                    generator,
                });
            }
        }
        rows
    }
}
