//! Tabular output as CSV (RFC 4180 quoting) or JSON lines (one object per
//! row), with every float printed to 17 significant digits.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated values with a header row.
    Csv,
    /// One JSON object per line.
    Json,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Floating-point number.
    F(f64),
    /// Signed integer.
    I(i64),
    /// Text.
    S(String),
    /// Boolean.
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json_token(&self) -> String {
        match self {
            Cell::F(v) if v.is_finite() => fmt_f64(*v),
            Cell::F(_) => "null".into(),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => serde_json::Value::String(s.clone()).to_string(),
            Cell::B(b) => b.to_string(),
        }
    }
}

/// A table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column names.
    pub columns: Vec<String>,
    /// Rows, each as long as `columns`.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// An empty table with the given columns.
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row.
    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes the table in `format`.
    pub fn write_to<W: Write>(&self, format: Format, out: W) -> CliResult<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns).map_err(io_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv_field)).map_err(io_err)?;
                }
                w.flush()?;
            }
            Format::Json => {
                let mut out = out;
                for row in &self.rows {
                    let fields: Vec<String> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| format!("{}:{}", serde_json::Value::String(c.clone()), v.json_token()))
                        .collect();
                    writeln!(out, "{{{}}}", fields.join(","))?;
                }
                out.flush()?;
            }
        }
        Ok(())
    }

    /// Writes to `path`, or to standard output when `path` is `None`.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> CliResult<()> {
        match path {
            Some(p) => self.write_to(format, File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
            None => self.write_to(format, io::stdout().lock()),
        }
    }
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Reads a table written by [`Table::write_to`] (CSV with header, or JSON
/// lines, chosen by a `.json`/`.jsonl` extension) as rows of named text fields.
pub fn read_records(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let is_json = matches!(path.extension().and_then(|e| e.to_str()), Some("json") | Some("jsonl"));
    if is_json {
        let mut columns: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let v: serde_json::Value =
                serde_json::from_str(line).map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let obj = v.as_object().ok_or_else(|| CliError::Usage(format!("{}:{}: not an object", path.display(), i + 1)))?;
            if columns.is_empty() {
                columns = obj.keys().cloned().collect();
            }
            rows.push(
                columns
                    .iter()
                    .map(|c| match obj.get(c) {
                        Some(serde_json::Value::String(s)) => s.clone(),
                        Some(serde_json::Value::Null) | None => "NaN".into(),
                        Some(v) => v.to_string(),
                    })
                    .collect(),
            );
        }
        Ok((columns, rows))
    } else {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r.headers().map_err(|e| CliError::Usage(e.to_string()))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| CliError::Usage(e.to_string())))
            .collect::<CliResult<Vec<Vec<String>>>>()?;
        Ok((columns, rows))
    }
}

/// Column `name` of `records` parsed as floats.
pub fn float_column(columns: &[String], rows: &[Vec<String>], name: &str) -> CliResult<Vec<f64>> {
    let i = columns.iter().position(|c| c == name).ok_or_else(|| CliError::Usage(format!("missing column {name}")))?;
    rows.iter()
        .map(|r| r[i].trim().parse::<f64>().map_err(|e| CliError::Usage(format!("column {name}: {e}"))))
        .collect()
}
