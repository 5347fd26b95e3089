//! File I/O shared by the subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use polyc_core::substrate::Genome;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Tool {
    pub fn current() -> Self {
        Tool {
            name: "polyc".into(),
            version: VERSION.into(),
        }
    }
}

/// Write via a sibling temp file and rename, so `path` is either absent,
/// the old content, or the complete new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(polyc_core::Error::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

/// A bare genome, or any JSON object carrying one under `"genome"` (such as
/// the best-genome file written by `evolve`).
pub fn load_genome(path: &Path) -> Result<Genome, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(polyc_core::Error::from)?;
    let inner = match value.get("genome") {
        Some(g) => g.clone(),
        None => value,
    };
    let genome: Genome = serde_json::from_value(inner)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    genome.validate()?;
    Ok(genome)
}

/// Columns of a trace CSV: the time column, then named data columns.
pub struct TraceTable {
    pub time: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl TraceTable {
    pub fn dt(&self) -> Result<f64, CliError> {
        let n = self.time.len();
        if n < 2 {
            return Err(CliError::Validation("trace needs at least 2 rows".into()));
        }
        Ok((self.time[n - 1] - self.time[0]) / (n - 1) as f64)
    }
}

pub fn write_trace_csv(path: &Path, table: &TraceTable) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("time")
        .chain(table.columns.iter().map(|(n, _)| n.as_str()))
        .collect();
    w.write_record(&header)?;
    for (k, t) in table.time.iter().enumerate() {
        let row: Vec<String> = std::iter::once(t.to_string())
            .chain(table.columns.iter().map(|(_, c)| c[k].to_string()))
            .collect();
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::from(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_trace_csv(path: &Path) -> Result<TraceTable, CliError> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("time") || headers.len() < 2 {
        return Err(CliError::Validation(format!(
            "{}: header must be `time` followed by at least one data column",
            path.display()
        )));
    }
    let mut table = TraceTable {
        time: Vec::new(),
        columns: headers
            .iter()
            .skip(1)
            .map(|h| (h.to_string(), Vec::new()))
            .collect(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: row {} column {} is not a number",
                        path.display(),
                        line + 2,
                        i + 1
                    ))
                })
        };
        table.time.push(parse(0)?);
        for (i, (_, col)) in table.columns.iter_mut().enumerate() {
            col.push(parse(i + 1)?);
        }
    }
    Ok(table)
}
