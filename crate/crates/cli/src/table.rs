//! CSV and JSON output, and scan input for `fit`.

use std::io::Write;
use std::path::Path;

use homsim::{HomScan, ScanKind};

use crate::CliError;

/// Columns accepted as the measured value, in order of preference.
pub const VALUE_COLUMNS: [&str; 5] = [
    "net_counts",
    "counts",
    "raw_counts",
    "coincidence_probability",
    "value",
];

/// Header plus rows, written with a period decimal separator and LF endings.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Io(format!("csv: {}", e.error())))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("json: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Reads a delay scan: a `delay_ps` column, one of [`VALUE_COLUMNS`], and an
/// optional `error` column.
pub fn read_scan(text: &str, origin: &str) -> Result<HomScan, CliError> {
    let parse_err = |msg: String| CliError::Parse(format!("{origin}: {msg}"));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() || text.trim().is_empty() {
        return Err(parse_err("empty file".into()));
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let delay = column("delay_ps").ok_or_else(|| parse_err("missing delay_ps column".into()))?;
    let (value_name, value) = VALUE_COLUMNS
        .iter()
        .find_map(|name| column(name).map(|i| (*name, i)))
        .ok_or_else(|| {
            parse_err(format!(
                "missing value column (one of {})",
                VALUE_COLUMNS.join(", ")
            ))
        })?;
    let error = column("error");

    let (mut delays, mut values, mut errors) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let record = record.map_err(|e| parse_err(format!("row {line}: {e}")))?;
        let field = |i: usize, name: &str| -> Result<f64, CliError> {
            let raw = record
                .get(i)
                .ok_or_else(|| parse_err(format!("row {line}: missing {name}")))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("row {line}: {name} '{raw}' is not a number")))
        };
        delays.push(field(delay, "delay_ps")?);
        values.push(field(value, value_name)?);
        if let Some(i) = error {
            errors.push(field(i, "error")?);
        }
    }
    if delays.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    let kind = if value_name == "coincidence_probability" {
        ScanKind::Probability
    } else {
        ScanKind::Counts
    };
    HomScan::new(kind, delays, values, error.map(|_| errors)).map_err(|e| parse_err(e.to_string()))
}

pub fn read_scan_file(path: &Path) -> Result<HomScan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    read_scan(&text, &path.display().to_string())
}
