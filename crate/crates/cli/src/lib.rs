//! Scenario files, batch runs, CSV and SVG output, and the executable
//! acceptance checks behind the `coadapt` binary.

pub mod check;
pub mod export;
pub mod plots;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use run::{exit, run_to_dir, RunFailure, RunOptions, RunSummary};
pub use scenario::{parse_scenario, parse_scenario_str, ScenarioError, ScenarioFile};
pub use sweep::RunManifest;
