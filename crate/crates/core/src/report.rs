//! Report emission: CSV table, JSON document and a gnuplot data file.
//!
//! Files are staged as temporaries inside the output directory and only
//! renamed into place once every one of them has been written in full.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::ConvergenceReport;

pub const CSV_FILE: &str = "report.csv";
pub const JSON_FILE: &str = "report.json";
pub const GNUPLOT_FILE: &str = "errors.dat";
pub const CSV_HEADER: &str = "n,error,order,cpu_direct_s,cpu_fast_s";

/// One row per resolution. `order` is blank on the first row since it
/// needs the previous error; the CPU columns are blank when timing was off.
pub fn csv_string(report: &ConvergenceReport) -> String {
    let primary = report.primary();
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (r, &n) in report.resolutions.iter().enumerate() {
        let order = match r.checked_sub(1).and_then(|i| primary.orders.get(i)) {
            Some(o) => format!("{o:e}"),
            None => String::new(),
        };
        let (direct, fast) = match report.timings.get(r).copied().flatten() {
            Some(t) => (format!("{:e}", t.direct_s), format!("{:e}", t.fast_s)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{n},{:e},{order},{direct},{fast}", primary.errors[r]);
    }
    out
}

/// Two whitespace-separated columns, `h error`, for log-log plots.
pub fn gnuplot_string(report: &ConvergenceReport) -> String {
    let primary = report.primary();
    let horizon = report.metadata.config.horizon;
    let mut out = format!("# h error ({})\n", primary.method);
    for (r, &n) in report.resolutions.iter().enumerate() {
        let _ = writeln!(out, "{:e} {:e}", horizon / n as f64, primary.errors[r]);
    }
    out
}

#[derive(Serialize)]
struct Document<'a, C: Serialize> {
    config: &'a C,
    report: &'a ConvergenceReport,
}

/// Pretty JSON with the effective run configuration under `"config"` and
/// the report under `"report"`.
pub fn json_string<C: Serialize>(config: &C, report: &ConvergenceReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document { config, report })?;
    s.push('\n');
    Ok(s)
}

/// Writes all `(file name, contents)` pairs into `dir`. Either every file
/// lands or none is replaced.
pub fn write_atomic_all(dir: &Path, files: &[(&str, &[u8])]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(contents)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::io(tmp.path(), e))?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, target) in staged {
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        written.push(target);
    }
    Ok(written)
}

/// Writes the CSV, JSON and gnuplot files into `dir`.
pub fn write_reports<C: Serialize>(
    dir: &Path,
    config: &C,
    report: &ConvergenceReport,
) -> Result<Vec<PathBuf>> {
    let csv = csv_string(report);
    let json = json_string(config, report)?;
    let dat = gnuplot_string(report);
    write_atomic_all(
        dir,
        &[
            (CSV_FILE, csv.as_bytes()),
            (JSON_FILE, json.as_bytes()),
            (GNUPLOT_FILE, dat.as_bytes()),
        ],
    )
}
