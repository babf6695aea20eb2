use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coadapt_cli::check::{Suite, CRITERIA};
use coadapt_cli::run::{exit, run_with_artifacts, RunFailure, RunOptions};
use coadapt_cli::scenario::{read_scenario_file, VariantName};
use coadapt_cli::sweep::{self, RunManifest};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "coadapt", version, about = "Adaptive force, impedance and trajectory control in periodic environments")]
struct Cli {
    /// Assert that the run draws no random numbers. Nothing in the pipeline
    /// does, so this only records the guarantee in the output.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    NoDamping,
}

impl From<VariantArg> for VariantName {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => VariantName::Full,
            VariantArg::NoDamping => VariantName::NoDamping,
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// Adaptation variant, overriding the scenario file.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Number of periods to simulate, overriding the scenario file.
    #[arg(long)]
    periods: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, periods.csv and optional plots.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a cartesian product of parameter values over a base scenario.
    Sweep {
        /// TOML manifest; command-line options override its fields.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sweep axis as `key=v1,v2,...`, e.g. `gains.gamma=10,20,40`. Repeatable.
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Number of runs executed in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        /// Largest allowed number of combinations.
        #[arg(long)]
        cap: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the bundled acceptance scenarios and print a pass/fail table.
    Check {
        /// Restrict to the given criteria, e.g. `--only AC-3`. Repeatable.
        #[arg(long)]
        only: Vec<String>,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
}

fn parse_axis(text: &str) -> anyhow::Result<(String, Vec<f64>)> {
    let (key, values) = text.split_once('=').ok_or_else(|| anyhow!("axis `{text}` must look like key=v1,v2"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("axis `{key}`: `{v}` is not a number")))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    Ok((key.trim().to_string(), values))
}

fn failure(err: &RunFailure) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn simulate(scenario: PathBuf, out: PathBuf, overrides: Overrides, seedless: bool) -> ExitCode {
    let mut file = match read_scenario_file(&scenario) {
        Ok(f) => f,
        Err(e) => return failure(&e.into()),
    };
    if let Some(v) = overrides.variant {
        file.controller.variant = v.into();
    }
    if let Some(p) = overrides.periods {
        file.time.periods = p;
    }
    let trace = match run_with_artifacts(&file, &out, RunOptions { plots: overrides.plots }) {
        Ok(t) => t,
        Err(e) => return failure(&e),
    };
    println!("period          J_c          J_e          J_r            J      delta_J     rms_eps  max_force_err");
    for p in &trace.period_costs {
        println!(
            "{:6} {:12.5e} {:12.5e} {:12.5e} {:12.5e} {:>12} {:11.4e} {:14.4e}",
            p.period,
            p.j_c,
            p.j_e,
            p.j_r,
            p.j,
            p.delta_j.map(|d| format!("{d:.4e}")).unwrap_or_else(|| "-".into()),
            p.rms_eps,
            p.max_force_err
        );
    }
    if seedless {
        println!("seedless: no random numbers were drawn");
    }
    println!("wrote {}", out.display());
    ExitCode::SUCCESS
}

#[allow(clippy::too_many_arguments)]
fn build_manifest(
    manifest: Option<PathBuf>,
    scenario: Option<PathBuf>,
    out: Option<PathBuf>,
    axes: Vec<String>,
    jobs: Option<usize>,
    cap: Option<usize>,
    overrides: Overrides,
) -> anyhow::Result<RunManifest> {
    let mut m = match manifest {
        Some(path) => RunManifest::from_file(&path)?,
        None => RunManifest {
            scenario: scenario.clone().ok_or_else(|| anyhow!("--scenario or --manifest is required"))?,
            out: out.clone().ok_or_else(|| anyhow!("--out or --manifest is required"))?,
            variant: None,
            periods: None,
            axes: BTreeMap::new(),
            jobs: 1,
            plots: false,
            cap: sweep::DEFAULT_CAP,
        },
    };
    if let Some(s) = scenario {
        m.scenario = s;
    }
    if let Some(o) = out {
        m.out = o;
    }
    for axis in axes {
        let (key, values) = parse_axis(&axis)?;
        m.axes.insert(key, values);
    }
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be >= 1");
        }
        m.jobs = j;
    }
    if let Some(c) = cap {
        m.cap = c;
    }
    if let Some(v) = overrides.variant {
        m.variant = Some(v.into());
    }
    if overrides.periods.is_some() {
        m.periods = overrides.periods;
    }
    m.plots |= overrides.plots;
    Ok(m)
}

fn run_sweep(manifest: RunManifest, seedless: bool) -> ExitCode {
    let entries = match sweep::run_sweep(&manifest) {
        Ok(e) => e,
        Err(e) => return failure(&e),
    };
    let mut worst = exit::SUCCESS;
    for e in &entries {
        let name = e.dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match &e.outcome {
            Ok(s) => println!("ok        {name}  J = {:.5e}, rms eps = {:.3e}", s.final_j, s.final_rms_eps),
            Err(err) => {
                println!("{:<9} {name}  {err}", err.kind());
                worst = worst.max(err.exit_code());
            }
        }
    }
    if seedless {
        println!("seedless: no random numbers were drawn");
    }
    println!("summary written to {}", manifest.out.join("summary.csv").display());
    ExitCode::from(worst as u8)
}

fn check(only: Vec<String>, jobs: usize) -> ExitCode {
    let selected: Vec<&str> = if only.is_empty() {
        CRITERIA.to_vec()
    } else {
        match only.iter().map(|id| CRITERIA.iter().copied().find(|c| c.eq_ignore_ascii_case(id)).ok_or(id)).collect() {
            Ok(v) => v,
            Err(id) => {
                eprintln!("error: unknown criterion `{id}`");
                return ExitCode::from(exit::CONFIG as u8);
            }
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::IO as u8);
        }
    };
    let suite = Suite::new();
    let outcomes: Vec<_> = pool.install(|| selected.par_iter().map(|id| suite.evaluate(id)).collect());
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(exit::CHECK_FAILED as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, out, overrides } => simulate(scenario, out, overrides, cli.seedless),
        Command::Sweep { manifest, scenario, out, axes, jobs, cap, overrides } => {
            match build_manifest(manifest, scenario, out, axes, jobs, cap, overrides) {
                Ok(m) => run_sweep(m, cli.seedless),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(exit::CONFIG as u8)
                }
            }
        }
        Command::Check { only, jobs } => check(only, jobs),
    }
}
