// SPDX-License-Identifier: Apache-2.0

//! Run manifests and the stamp every report carries.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sta_core::netlist::{serialize_design, Design};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical serialization, independent of input formatting.
pub fn design_hash(design: &Design) -> String {
    sha256_hex(serialize_design(design).as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub design_hash: Option<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    /// Excluded from [`RunManifest::id`].
    pub wall_seconds: f64,
}

/// Reference to a manifest embedded in reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStamp {
    pub id: String,
    pub command: String,
    pub tool_version: String,
    pub design_hash: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, design_hash: Option<String>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            design_hash,
            tool_version: TOOL_VERSION.to_string(),
            seed,
            outputs: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    /// Hash of every field except the wall time.
    pub fn id(&self) -> String {
        let hashable = Self {
            wall_seconds: 0.0,
            ..self.clone()
        };
        sha256_hex(serde_json::to_string(&hashable).expect("manifest serializes").as_bytes())
    }

    pub fn stamp(&self) -> ManifestStamp {
        ManifestStamp {
            id: self.id(),
            command: self.command.clone(),
            tool_version: self.tool_version.clone(),
            design_hash: self.design_hash.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_ignores_wall_time() {
        let mut m = RunManifest::new("gen", serde_json::json!({"a": 1}), None, Some(3));
        let id = m.id();
        m.wall_seconds = 12.5;
        assert_eq!(m.id(), id);
        m.seed = Some(4);
        assert_ne!(m.id(), id);
    }
}
