//! Trace CSV and summary JSON.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use hcopt::Trace;

use crate::pipeline::RunOutcome;

/// Column order of every trace file.
pub const CSV_COLUMNS: &str = "oracle_calls,f1,f2,penalty,eta,iter_kind";

/// First line of every trace file; the only line that differs between
/// identical runs.
pub const CSV_STAMP_PREFIX: &str = "# hcopt trace written at unix time ";

pub fn write_trace<W: Write>(out: &mut W, trace: &Trace) -> io::Result<()> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    writeln!(out, "{CSV_STAMP_PREFIX}{now}")?;
    writeln!(out, "{CSV_COLUMNS}")?;
    for r in trace.records() {
        let eta = r.eta.map(|e| e.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.oracle_calls, r.f1, r.f2, r.penalty, eta, r.iter_kind
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub method: String,
    pub problem: String,
    pub seed: u64,
    pub f1_final: f64,
    pub f2_final: f64,
    pub f1_star_ref: Option<f64>,
    pub gap: Option<f64>,
    pub oracle_calls_total: u64,
    pub wall_ms: u64,
    pub value_calls_total: u64,
    pub tol_gap: f64,
    pub tol_f2: f64,
    pub within_tolerance: Option<bool>,
    pub trace_file: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(outcome: &RunOutcome, trace_file: Option<&Path>) -> Self {
        let r = &outcome.report;
        Self {
            method: outcome.config.method.to_string(),
            problem: outcome.config.problem.to_string(),
            seed: outcome.config.seed,
            f1_final: r.f1,
            f2_final: r.f2,
            f1_star_ref: outcome.f1_star_ref,
            gap: outcome.gap(),
            oracle_calls_total: r.first_order_calls,
            wall_ms: outcome.wall_ms,
            value_calls_total: r.value_calls,
            tol_gap: outcome.tol_gap,
            tol_f2: outcome.tol_f2,
            within_tolerance: outcome.within_tolerance(),
            trace_file: trace_file
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned()),
            params: r.params.clone(),
            notes: r.notes.clone(),
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_run(dir: &Path, stem: &str, outcome: &RunOutcome) -> io::Result<(PathBuf, Summary)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let mut f = io::BufWriter::new(fs::File::create(&csv)?);
    write_trace(&mut f, &outcome.report.trace)?;
    f.flush()?;
    let summary = Summary::new(outcome, Some(&csv));
    write_json(&dir.join(format!("{stem}.json")), &summary)?;
    Ok((csv, summary))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

/// Trace rows without the timestamp line, for comparing runs.
pub fn strip_stamp(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with(CSV_STAMP_PREFIX))
        .collect::<Vec<_>>()
        .join("\n")
}
