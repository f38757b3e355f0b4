// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for `sta-core`: design generation, timing runs,
//! scheme comparison, gradient checks and benchmark suites.
//!
//! Every command prints a JSON report on standard output, writes
//! diagnostics to standard error and exits with 0 when all requested
//! checks pass, 1 when a check fails and 2 on usage or input errors.

pub mod bench;
pub mod commands;
pub mod manifest;
pub mod suite;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use sta_core::diff::LossKind;
use sta_core::warp::Fault;

use commands::{Engine, GradOptions};

#[derive(Debug, Parser)]
#[command(name = "stasim", version, about = "Static timing analysis with warp scheduling, gradients and stream fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Hinge,
    Softplus,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Hinge => LossKind::Hinge,
            LossArg::Softplus => LossKind::Softplus,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive number"))
    }
}

fn engine(s: &str) -> Result<Engine, String> {
    Engine::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic design from a generator config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run timing analysis with the reference engine or a warp scheme.
    Sta {
        #[arg(long)]
        design: PathBuf,
        /// reference, net-based, pin-based or cte.
        #[arg(long, value_parser = engine, default_value = "reference")]
        scheme: Engine,
        /// Full report path; a CSV of per-pin records is written beside it.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run all three schemes and check them against the reference.
    Compare {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: drop one partial from every root-load reduction.
        #[arg(long, hide = true)]
        inject_fault_lane: Option<usize>,
    },
    /// Smooth timing loss and its gradients.
    Grad {
        #[arg(long)]
        design: PathBuf,
        /// Smoothness in seconds; defaults to 1% of the clock period.
        #[arg(long, value_parser = positive_f64)]
        gamma: Option<f64>,
        #[arg(long, value_enum, default_value = "hinge")]
        loss: LossArg,
        /// Compare against central finite differences.
        #[arg(long)]
        check: bool,
        /// Exit with failure when the check exceeds its tolerance.
        #[arg(long, requires = "check")]
        strict: bool,
        /// Finite-difference step as a fraction of the clock period.
        #[arg(long, value_parser = positive_f64, default_value = "1e-6")]
        epsilon: f64,
        /// Check only this many coordinates (0 checks all).
        #[arg(long, default_value = "0")]
        check_sample: usize,
        /// Also run the fused timing and gradient pipeline.
        #[arg(long)]
        fuse: bool,
        #[arg(long, default_value_t = sta_core::fusion::DEFAULT_GRANULARITY)]
        granularity: usize,
        /// Gradient kernel cost relative to the timing kernel of the same level.
        #[arg(long, default_value = "0.5")]
        grad_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for independent rows; 1 runs rows in sequence.
        #[arg(long, default_value = "1")]
        parallel: usize,
    },
}

/// Runs one command; `Ok(false)` means a requested check failed.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<bool> {
    match cli.command {
        Command::Gen { config, out: path } => commands::cmd_gen(&config, &path, out),
        Command::Sta { design, scheme, report } => commands::cmd_sta(&design, scheme, report.as_deref(), out),
        Command::Compare {
            design,
            out: dir,
            inject_fault_lane,
        } => commands::cmd_compare(
            &design,
            dir.as_deref(),
            inject_fault_lane.map(|lane| Fault::DropReductionLane { lane }),
            out,
        ),
        Command::Grad {
            design,
            gamma,
            loss,
            check,
            strict,
            epsilon,
            check_sample,
            fuse,
            granularity,
            grad_scale,
            out: dir,
        } => {
            anyhow::ensure!(granularity >= 1, "granularity must be at least 1");
            anyhow::ensure!(grad_scale >= 0.0, "grad-scale must be non-negative");
            let opts = GradOptions {
                gamma,
                loss: loss.into(),
                check,
                strict,
                epsilon,
                check_sample,
                fuse,
                granularity,
                grad_scale,
                out_dir: dir,
            };
            commands::cmd_grad(&design, &opts, out)
        }
        Command::Bench { suite, out: dir, parallel } => bench::cmd_bench(&suite, &dir, parallel.max(1), out),
    }
}
