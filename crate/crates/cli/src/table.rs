//! CSV ingestion and emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use synthforge::{Dataset, Matrix};

use crate::error::{CliError, Result};

const STAGE: &str = "ingest";
const MAX_LISTED_ROWS: usize = 20;

/// A parsed dataset together with the header it came from.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub header: Vec<String>,
    pub input_columns: Vec<usize>,
    pub response_column: Option<usize>,
    /// Hex SHA-256 of the raw file bytes.
    pub digest: String,
}

impl Ingested {
    pub fn input_names(&self) -> Vec<String> {
        self.input_columns.iter().map(|&c| self.header[c].clone()).collect()
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response_column.map(|c| self.header[c].as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Resolves a selector to a column index. Header names win; otherwise a
/// non-negative integer is taken as a 0-based position.
pub fn resolve_column(header: &[String], selector: &str) -> Result<usize> {
    if let Some(i) = header.iter().position(|h| h == selector) {
        return Ok(i);
    }
    match selector.parse::<usize>() {
        Ok(i) if i < header.len() => Ok(i),
        _ => Err(CliError::usage(
            STAGE,
            format!("column '{selector}' not found (header: {})", header.join(",")),
        )),
    }
}

/// Input and response columns. Without selectors the last column is the
/// response and all others are inputs.
pub fn select_columns(
    header: &[String],
    inputs: Option<&[String]>,
    response: Option<&str>,
    want_response: bool,
) -> Result<(Vec<usize>, Option<usize>)> {
    let response = match response {
        Some(sel) => Some(resolve_column(header, sel)?),
        None if want_response && inputs.is_none() => {
            if header.len() < 2 {
                return Err(CliError::usage(STAGE, "need at least one input and one response column"));
            }
            Some(header.len() - 1)
        }
        None => None,
    };
    let inputs = match inputs {
        Some(sels) => sels.iter().map(|s| resolve_column(header, s)).collect::<Result<Vec<_>>>()?,
        None => (0..header.len()).filter(|&i| Some(i) != response).collect(),
    };
    if inputs.is_empty() {
        return Err(CliError::usage(STAGE, "no input columns selected"));
    }
    let mut seen = inputs.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::usage(STAGE, "input columns selected more than once"));
    }
    if let Some(r) = response {
        if inputs.contains(&r) {
            return Err(CliError::usage(
                STAGE,
                format!("response column '{}' is also an input", header[r]),
            ));
        }
    }
    if want_response && response.is_none() {
        return Err(CliError::usage(STAGE, "a response column is required (--response)"));
    }
    Ok((inputs, response))
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV and keeps the selected numeric columns.
pub fn ingest(
    path: &Path,
    inputs: Option<&[String]>,
    response: Option<&str>,
    want_response: bool,
) -> Result<Ingested> {
    let bytes = fs::read(path).map_err(|e| CliError::io(STAGE, path, e))?;
    let digest = sha256_hex(&bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::usage(STAGE, format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::usage(STAGE, format!("{}: empty file", path.display())));
    }
    let (input_columns, response_column) = select_columns(&header, inputs, response, want_response)?;

    let selected: Vec<usize> = input_columns.iter().copied().chain(response_column).collect();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut bad_lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::usage(STAGE, format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Option<Vec<f64>> = selected.iter().map(|&c| record.get(c).and_then(parse_cell)).collect();
        match row {
            Some(r) => values.push(r),
            None => bad_lines.push(line),
        }
    }
    if !bad_lines.is_empty() {
        let listed: Vec<String> = bad_lines.iter().take(MAX_LISTED_ROWS).map(u64::to_string).collect();
        let more = bad_lines.len().saturating_sub(MAX_LISTED_ROWS);
        return Err(CliError::usage(
            STAGE,
            format!(
                "{}: non-numeric or non-finite values in selected columns on line(s) {}{}",
                path.display(),
                listed.join(", "),
                if more > 0 { format!(" and {more} more") } else { String::new() }
            ),
        ));
    }
    if values.is_empty() {
        return Err(CliError::usage(STAGE, format!("{}: no data rows", path.display())));
    }
    let d = input_columns.len();
    let x = Matrix::from_fn(values.len(), d, |i, j| values[i][j]);
    let y = response_column.map(|_| values.iter().map(|r| r[d]).collect());
    let dataset = Dataset::new(x, y).map_err(|e| CliError::usage(STAGE, e.to_string()))?;
    Ok(Ingested {
        dataset,
        header,
        input_columns,
        response_column,
        digest,
    })
}

/// Shortest text that parses back to the same `f64`; exponent form for very
/// small or very large magnitudes.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-6..1e21).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `data` using the column layout of `source`: selected columns in
/// their original header order, unselected columns dropped.
pub fn write_like(path: &Path, source: &Ingested, data: &Dataset) -> Result<()> {
    let mut layout: Vec<(usize, Option<usize>)> = source
        .input_columns
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, Some(k)))
        .chain(source.response_column.map(|c| (c, None)))
        .collect();
    layout.sort_by_key(|&(c, _)| c);
    let y = data.response();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(layout.iter().map(|&(c, _)| source.header[c].as_str()))
        .map_err(|e| csv_error(path, e))?;
    for i in 0..data.n_rows() {
        let row = data.inputs().row(i);
        let cells = layout.iter().map(|&(_, k)| match k {
            Some(k) => format_f64(row[k]),
            None => y.map_or(String::new(), |y| format_f64(y[i])),
        });
        w.write_record(cells).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io("output", path, e))
}

/// Writes a plain table of strings.
pub fn write_rows<'a>(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>> + 'a) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io("output", path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage("output", format!("{}: {e}", path.display())))?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| CliError::io("output", path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io("output", path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io("output", path, io),
        other => CliError::usage("output", format!("{}: {other:?}", path.display())),
    }
}
