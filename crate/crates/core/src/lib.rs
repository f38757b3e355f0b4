// SPDX-License-Identifier: Apache-2.0

//! Static timing analysis with a lockstep warp cost simulator, a
//! differentiable timing layer and a two-stream fusion scheduler.
//!
//! - [`netlist`]: design model, JSON format, validation, generator.
//! - [`sta`]: sequential reference analysis.
//! - [`warp`]: task-assignment schemes and their simulated execution.
//! - [`diff`]: smooth-max arrivals and TNS gradients.
//! - [`fusion`]: overlap scheduling of timing and gradient kernels.

pub mod diff;
pub mod fusion;
pub mod netlist;
pub mod par;
pub mod serde_f64;
pub mod sta;
pub mod warp;
