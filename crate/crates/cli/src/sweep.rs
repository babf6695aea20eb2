//! Cartesian gain sweeps over a base scenario, run in parallel.

use crate::run::{run_to_dir, RunFailure, RunOptions, RunSummary};
use crate::scenario::{read_scenario_file, ScenarioError, ScenarioFile, VariantName};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_CAP: usize = 256;

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_jobs() -> usize {
    1
}

/// Everything needed to reproduce a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub scenario: PathBuf,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    /// Dotted scenario key (for example `gains.gamma`) to the values it takes.
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub plots: bool,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

impl RunManifest {
    /// Reads a manifest; relative paths inside it are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let mut m: RunManifest = toml::from_str(&text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if m.scenario.is_relative() {
            m.scenario = base.join(&m.scenario);
        }
        if m.out.is_relative() {
            m.out = base.join(&m.out);
        }
        Ok(m)
    }
}

/// One point of the sweep: sorted `(key, value)` pairs.
pub type Assignment = Vec<(String, f64)>;

fn invalid(key: &str, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { key: key.to_string(), constraint: constraint.into() }
}

/// Cartesian product of the axes in key order, refusing products above `cap`.
pub fn combinations(axes: &BTreeMap<String, Vec<f64>>, cap: usize) -> Result<Vec<Assignment>, ScenarioError> {
    let mut size: usize = 1;
    for (key, values) in axes {
        if key.is_empty() || key.contains(['=', ',', '/', '\\']) {
            return Err(invalid("axes", format!("`{key}` is not a valid key")));
        }
        if values.is_empty() {
            return Err(invalid(&format!("axes.{key}"), "needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid(&format!("axes.{key}"), "values must be finite"));
        }
        size = size.saturating_mul(values.len());
    }
    if size > cap {
        return Err(invalid("axes", format!("{size} combinations exceed the cap of {cap}")));
    }
    let mut out: Vec<Assignment> = vec![Vec::new()];
    for (key, values) in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((key.clone(), *v));
                    next
                })
            })
            .collect();
    }
    Ok(out)
}

/// Directory name for an assignment: `key=value` pairs joined by commas, with
/// values in shortest round-trip form so distinct points get distinct names.
pub fn dir_name(assignment: &Assignment) -> String {
    if assignment.is_empty() {
        return "base".to_string();
    }
    let mut parts: Vec<String> = assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.sort();
    parts.join(",")
}

pub fn apply(base: &ScenarioFile, assignment: &Assignment) -> Result<ScenarioFile, ScenarioError> {
    assignment.iter().try_fold(base.clone(), |file, (key, value)| file.set_number(key, *value))
}

#[derive(Debug)]
pub struct SweepEntry {
    pub dir: PathBuf,
    pub assignment: Assignment,
    pub outcome: Result<RunSummary, RunFailure>,
}

/// Runs every combination on a pool of `manifest.jobs` threads and writes
/// `summary.csv` next to the per-combination directories.
pub fn run_sweep(manifest: &RunManifest) -> Result<Vec<SweepEntry>, RunFailure> {
    let mut base = read_scenario_file(&manifest.scenario)?;
    if let Some(v) = manifest.variant {
        base.controller.variant = v;
    }
    if let Some(p) = manifest.periods {
        base.time.periods = p;
    }
    let points = combinations(&manifest.axes, manifest.cap)?;
    std::fs::create_dir_all(&manifest.out).map_err(RunFailure::Io)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.jobs.max(1))
        .build()
        .map_err(|e| RunFailure::Io(std::io::Error::other(e.to_string())))?;
    let options = RunOptions { plots: manifest.plots };
    let entries: Vec<SweepEntry> = pool.install(|| {
        points
            .into_par_iter()
            .map(|assignment| {
                let dir = manifest.out.join(dir_name(&assignment));
                let outcome = apply(&base, &assignment).map_err(RunFailure::from).and_then(|file| run_to_dir(&file, &dir, options));
                SweepEntry { dir, assignment, outcome }
            })
            .collect()
    });
    write_summary(&entries, &manifest.out.join("summary.csv")).map_err(RunFailure::Io)?;
    Ok(entries)
}

fn write_summary(entries: &[SweepEntry], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "status", "final_J", "final_rms_eps", "final_mean_force", "final_force_err", "message"])?;
    for e in entries {
        let name = e.dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match &e.outcome {
            Ok(s) => w.write_record([
                name,
                "ok".into(),
                s.final_j.to_string(),
                s.final_rms_eps.to_string(),
                s.final_mean_force.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
                s.final_force_err.to_string(),
                String::new(),
            ])?,
            Err(err) => w.write_record([
                name,
                err.kind().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                err.to_string(),
            ])?,
        }
    }
    w.flush()
}
