//! CSV output of traces and per-period summaries.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so parsing a
//! field back yields the identical `f64`.

use coadapt::{PeriodCosts, StepRecord, Trace};
use std::path::{Path, PathBuf};

pub const TRACE_FILE: &str = "trace.csv";
pub const PERIODS_FILE: &str = "periods.csv";
pub const PERIOD_COLUMNS: [&str; 10] =
    ["period", "J_c", "J_e", "J_r", "J", "delta_J", "rms_eps", "max_force_err", "margin_min", "slack_min"];

fn axis(i: usize) -> String {
    (i + 1).to_string()
}

fn pair(i: usize, j: usize, n: usize) -> String {
    if n < 10 {
        format!("{}{}", i + 1, j + 1)
    } else {
        format!("{}_{}", i + 1, j + 1)
    }
}

/// Column names of `trace.csv` for an `n`-dimensional task space.
pub fn trace_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for prefix in ["x", "xdot", "xr", "e", "eps", "F"] {
        cols.extend((0..n).map(|i| format!("{prefix}_{}", axis(i))));
    }
    for prefix in ["KS", "KD"] {
        for i in 0..n {
            cols.extend((0..n).map(|j| format!("{prefix}_{}", pair(i, j, n))));
        }
    }
    for prefix in ["xir", "f", "u", "v", "w"] {
        cols.extend((0..n).map(|i| format!("{prefix}_{}", axis(i))));
    }
    cols
}

/// Numeric row matching [`trace_columns`].
pub fn trace_row(rec: &StepRecord) -> Vec<f64> {
    let n = rec.x.len();
    let mut row = Vec::with_capacity(1 + 11 * n + 2 * n * n);
    row.push(rec.t);
    for v in [&rec.x, &rec.xdot, &rec.x_r, &rec.e, &rec.eps, &rec.force_est] {
        row.extend(v.iter());
    }
    for m in [&rec.stiffness, &rec.damping] {
        for i in 0..n {
            row.extend((0..n).map(|j| m[(i, j)]));
        }
    }
    for v in [&rec.xi_r, &rec.f, &rec.u, &rec.v, &rec.w] {
        row.extend(v.iter());
    }
    row
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_columns(trace.dim))?;
    for rec in &trace.steps {
        w.write_record(trace_row(rec).iter().map(f64::to_string))?;
    }
    w.flush()
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn period_row(p: &PeriodCosts) -> Vec<String> {
    vec![
        p.period.to_string(),
        p.j_c.to_string(),
        p.j_e.to_string(),
        p.j_r.to_string(),
        p.j.to_string(),
        optional(p.delta_j),
        p.rms_eps.to_string(),
        p.max_force_err.to_string(),
        p.margin_min.to_string(),
        p.slack_min.to_string(),
    ]
}

pub fn write_periods_csv(costs: &[PeriodCosts], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PERIOD_COLUMNS)?;
    for p in costs {
        w.write_record(period_row(p))?;
    }
    w.flush()
}

/// Writes `trace.csv` and `periods.csv` into `dir`, creating it if needed.
pub fn emit_trace_csv(trace: &Trace, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let trace_path = dir.join(TRACE_FILE);
    let periods_path = dir.join(PERIODS_FILE);
    write_trace_csv(trace, &trace_path)?;
    write_periods_csv(&trace.period_costs, &periods_path)?;
    Ok(vec![trace_path, periods_path])
}

/// A numeric CSV table read back from disk. Empty fields become `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn read_table(path: &Path) -> anyhow::Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let columns = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| if f.is_empty() { Ok(None) } else { f.parse::<f64>().map(Some) })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}
