//! Per-round metrics and their CSV/JSON serialization.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::AlgoConfig;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;

/// Min, median and max of a per-client quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample; NaNs are ignored.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { min: v[0], median, max: v[n - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// `‖w^t − w*‖ / ‖w*‖`.
    pub relative_error: f64,
    /// `f(w^t) − f*`.
    pub loss_gap: f64,
    pub grad_norm: f64,
    /// Cumulative communication rounds.
    pub comm_rounds: u64,
    /// Cumulative floats broadcast to each client.
    pub comm_floats: u64,
    /// Cumulative floats uploaded by each client.
    pub comm_floats_up: u64,
    /// Seconds since the run started.
    pub wall_seconds: f64,
    pub theta: Option<Summary>,
    pub delta: Option<Summary>,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    /// Relative error reached the tolerance at this round.
    Converged { round: usize },
    /// All configured rounds ran.
    Exhausted,
    /// Round `round` failed; the trace ends before it.
    Diverged { round: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoTrace {
    pub label: String,
    /// The configuration actually run, with `η` resolved.
    pub config: AlgoConfig,
    pub status: RunStatus,
    /// Record `t` describes `w^t`; record 0 is the starting point.
    pub records: Vec<TraceRecord>,
}

impl AlgoTrace {
    /// First round whose relative error is at most `tol`.
    pub fn rounds_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.relative_error <= tol).map(|r| r.t)
    }

    pub fn final_error(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.relative_error)
    }
}

/// Reference solution used for the error metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub f_star: f64,
    pub w_star: Vec<f64>,
    pub grad_norm: f64,
    /// Smoothness constant used to resolve relative step sizes.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Resolved configuration; enough to rerun the experiment.
    pub config: ExperimentConfig,
    pub reference: Reference,
    pub traces: Vec<AlgoTrace>,
}

pub const CSV_HEADER: [&str; 10] = [
    "algo",
    "t",
    "rel_err",
    "loss_gap",
    "grad_norm",
    "comm_rounds",
    "comm_floats",
    "wall_s",
    "theta_med",
    "delta_med",
];

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algo: String,
    pub t: usize,
    pub rel_err: f64,
    pub loss_gap: f64,
    pub grad_norm: f64,
    pub comm_rounds: u64,
    pub comm_floats: u64,
    pub wall_s: f64,
    pub theta_med: Option<f64>,
    pub delta_med: Option<f64>,
}

impl CsvRow {
    pub fn from_record(algo: &str, r: &TraceRecord) -> Self {
        Self {
            algo: algo.to_string(),
            t: r.t,
            rel_err: r.relative_error,
            loss_gap: r.loss_gap,
            grad_norm: r.grad_norm,
            comm_rounds: r.comm_rounds,
            comm_floats: r.comm_floats,
            wall_s: r.wall_seconds,
            theta_med: r.theta.map(|s| s.median),
            delta_med: r.delta.map(|s| s.median),
        }
    }
}

// 17 significant digits round-trip every f64.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn write_csv<W: Write>(traces: &[AlgoTrace], out: W) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to emit".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for trace in traces {
        for r in &trace.records {
            let row = CsvRow::from_record(&trace.label, r);
            w.write_record([
                row.algo,
                row.t.to_string(),
                real(row.rel_err),
                real(row.loss_gap),
                real(row.grad_norm),
                row.comm_rounds.to_string(),
                row.comm_floats.to_string(),
                real(row.wall_s),
                opt_real(row.theta_med),
                opt_real(row.delta_med),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, msg: "unexpected CSV header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).ok_or_else(|| Error::Parse { line, msg: format!("missing column {j}") });
        let num = |j: usize| -> Result<f64> {
            field(j)?.parse().map_err(|_| Error::Parse { line, msg: format!("bad number in column {j}") })
        };
        let int = |j: usize| -> Result<u64> {
            field(j)?.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer in column {j}") })
        };
        let opt = |j: usize| -> Result<Option<f64>> {
            match field(j)? {
                "" => Ok(None),
                _ => num(j).map(Some),
            }
        };
        rows.push(CsvRow {
            algo: field(0)?.to_string(),
            t: int(1)? as usize,
            rel_err: num(2)?,
            loss_gap: num(3)?,
            grad_norm: num(4)?,
            comm_rounds: int(5)?,
            comm_floats: int(6)?,
            wall_s: num(7)?,
            theta_med: opt(8)?,
            delta_med: opt(9)?,
        });
    }
    Ok(rows)
}

pub fn write_json<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    if report.traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to emit".into()));
    }
    serde_json::to_writer_pretty(out, report)?;
    Ok(())
}

/// Writes whichever outputs the config names.
pub fn emit_traces(report: &ExperimentReport, csv_path: Option<&Path>, json_path: Option<&Path>) -> Result<()> {
    if report.traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to emit".into()));
    }
    for p in [csv_path, json_path].into_iter().flatten() {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    if let Some(p) = csv_path {
        write_csv(&report.traces, std::io::BufWriter::new(std::fs::File::create(p)?))?;
    }
    if let Some(p) = json_path {
        write_json(report, std::io::BufWriter::new(std::fs::File::create(p)?))?;
    }
    Ok(())
}
