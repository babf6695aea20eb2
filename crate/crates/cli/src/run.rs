//! Running one scenario end to end and writing its artifacts.

use crate::export::emit_trace_csv;
use crate::plots::emit_plots;
use crate::scenario::{ScenarioError, ScenarioFile};
use coadapt::{run_scenario, SimError, Trace, Vector};
use std::path::Path;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum RunFailure {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Config(ScenarioError::Io { .. }) | RunFailure::Io(_) => exit::IO,
            RunFailure::Config(_) => exit::CONFIG,
            RunFailure::Sim(e) if !e.is_divergence() => exit::CONFIG,
            RunFailure::Sim(_) => exit::DIVERGENCE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::CONFIG => "config-error",
            exit::DIVERGENCE => "diverged",
            _ => "io-error",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub plots: bool,
}

/// Headline numbers of a finished run, taken from its final period.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub periods: usize,
    pub final_j: f64,
    pub final_rms_eps: f64,
    pub final_mean_force: Vector,
    pub final_force_err: f64,
}

impl RunSummary {
    pub fn from_trace(trace: &Trace) -> Self {
        let last = trace.period_costs.last().expect("a finished run has at least one period");
        Self {
            periods: trace.periods,
            final_j: last.j,
            final_rms_eps: last.rms_eps,
            final_mean_force: last.mean_force.clone(),
            final_force_err: last.max_force_err,
        }
    }
}

/// Validates and runs `file`, writing the effective scenario, the CSV files and
/// optionally the plots into `dir`.
pub fn run_to_dir(file: &ScenarioFile, dir: &Path, options: RunOptions) -> Result<RunSummary, RunFailure> {
    let trace = run_with_artifacts(file, dir, options)?;
    Ok(RunSummary::from_trace(&trace))
}

pub fn run_with_artifacts(file: &ScenarioFile, dir: &Path, options: RunOptions) -> Result<Trace, RunFailure> {
    let config = file.build()?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scenario.scenario"), file.to_toml())?;
    let trace = run_scenario(&config)?;
    emit_trace_csv(&trace, dir)?;
    if options.plots {
        emit_plots(&trace, config.desired_position().as_ref(), dir)?;
    }
    Ok(trace)
}
