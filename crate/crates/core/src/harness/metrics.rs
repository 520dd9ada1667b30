//! Per-round metrics and their CSV form.
//!
//! Floats are written with 17 significant digits so they read back exactly;
//! absent values are empty cells.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "round",
    "test_accuracy",
    "cum_bits",
    "bits_per_coeff",
    "aircomp_mse",
    "selected_device",
    "wall_time_ms",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_accuracy: Option<f64>,
    pub cum_bits: Option<u64>,
    pub bits_per_coeff: Option<f64>,
    pub aircomp_mse: Option<f64>,
    pub selected_device: Option<usize>,
    /// Informational only; excluded from determinism checks.
    pub wall_time_ms: f64,
}

pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn parse_opt<T: std::str::FromStr>(cell: &str, column: &str, line: u64) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("line {line}, column {column}: cannot parse {cell:?}")))
}

pub fn write_metrics_to<W: Write>(metrics: &[RoundMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record([
            m.round.to_string(),
            opt(m.test_accuracy, fmt_float),
            opt(m.cum_bits, |v| v.to_string()),
            opt(m.bits_per_coeff, fmt_float),
            opt(m.aircomp_mse, fmt_float),
            opt(m.selected_device, |v| v.to_string()),
            format!("{:.3}", m.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(metrics: &[RoundMetrics], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_metrics_to(metrics, std::fs::File::create(path)?)
}

pub fn read_metrics_from<R: Read>(input: R) -> Result<Vec<RoundMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != METRICS_HEADER {
        return Err(Error::Format(format!(
            "metrics header {header:?} does not match {METRICS_HEADER:?}"
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let round =
            parse_opt(&rec[0], "round", line)?.ok_or_else(|| Error::Format(format!("line {line}: missing round")))?;
        out.push(RoundMetrics {
            round,
            test_accuracy: parse_opt(&rec[1], METRICS_HEADER[1], line)?,
            cum_bits: parse_opt(&rec[2], METRICS_HEADER[2], line)?,
            bits_per_coeff: parse_opt(&rec[3], METRICS_HEADER[3], line)?,
            aircomp_mse: parse_opt(&rec[4], METRICS_HEADER[4], line)?,
            selected_device: parse_opt(&rec[5], METRICS_HEADER[5], line)?,
            wall_time_ms: parse_opt(&rec[6], METRICS_HEADER[6], line)?.unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub fn read_metrics(path: &Path) -> Result<Vec<RoundMetrics>> {
    read_metrics_from(std::fs::File::open(path)?)
}
