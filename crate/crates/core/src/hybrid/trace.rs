use std::path::Path;

use super::ConvergenceReport;
use crate::error::{Error, Result};

const HEADER: &str = "iteration,delta";

/// `iteration,delta` rows with 17 significant digits, so every delta
/// parses back to the identical `f64`.
pub fn trace_csv(report: &ConvergenceReport) -> String {
    let mut out = String::with_capacity(32 * (report.latent_deltas.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for (k, d) in report.latent_deltas.iter().enumerate() {
        out.push_str(&format!("{},{d:.16e}\n", k + 1));
    }
    out
}

pub fn write_trace_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(report)).map_err(|e| Error::io(path, e))
}

/// Parses a trace written by [`trace_csv`] into the delta sequence.
pub fn parse_trace_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().unwrap_or("");
    if first.trim_end() != HEADER {
        return Err(Error::format(0, "trace must start with `iteration,delta`"));
    }
    let mut offset = first.len();
    let mut deltas = Vec::new();
    for (row, raw) in lines.enumerate() {
        let line = raw.trim_end();
        let at = offset;
        offset += raw.len();
        let bad = || Error::format(at, format!("malformed trace row `{line}`"));
        let (k, d) = line.split_once(',').ok_or_else(bad)?;
        if k.parse::<usize>().map_err(|_| bad())? != row + 1 {
            return Err(bad());
        }
        deltas.push(d.parse::<f64>().map_err(|_| bad())?);
    }
    Ok(deltas)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<f64>> {
    parse_trace_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
