//! Data files in, tables out.
//!
//! Univariate samples are headerless single-column CSV, multivariate
//! samples headerless CSV with one observation per row, and regression data
//! CSV with a header row `x1,...,xp,y`. Output tables are CSV with 6
//! significant digits (full precision on request) or JSON arrays of row
//! objects at full precision.

use std::io::{Read, Write};

use serde_json::{Map, Number, Value};

use renyi_core::linalg::Matrix;

use crate::error::{Error, Result};

fn parse_field(field: &str, line: u64) -> Result<f64> {
    let t = field.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("line {line}: '{t}' is not a finite number")))
}

fn reader<R: Read>(input: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(headers).flexible(true).trim(csv::Trim::All).from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Headerless CSV with one value per line.
pub fn read_univariate<R: Read>(input: R) -> Result<Vec<f64>> {
    let (dim, values) = read_rows(input)?;
    if dim != 1 {
        return Err(Error::Parse(format!("expected a single column, found {dim}")));
    }
    Ok(values)
}

/// Headerless CSV, all rows of equal width. Returns `(width, row-major values)`.
pub fn read_rows<R: Read>(input: R) -> Result<(usize, Vec<f64>)> {
    let mut rdr = reader(input, false);
    let mut width = 0;
    let mut out = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = line_of(&rec);
        if width == 0 {
            width = rec.len();
        } else if rec.len() != width {
            return Err(Error::Parse(format!("line {line}: expected {width} fields, found {}", rec.len())));
        }
        for f in rec.iter() {
            out.push(parse_field(f, line)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok((width, out))
}

/// Regression data with header `x1,...,xp,y`: the last column is the
/// response, the others form the design matrix (no intercept is added).
pub struct RegressionInput {
    pub names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

pub fn read_regression<R: Read>(input: R) -> Result<RegressionInput> {
    let mut rdr = reader(input, true);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(Error::Parse("regression input needs at least one covariate column and a response".into()));
    }
    let p = header.len() - 1;
    let mut x = vec![];
    let mut y = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = line_of(&rec);
        if rec.len() != p + 1 {
            return Err(Error::Parse(format!("line {line}: expected {} fields, found {}", p + 1, rec.len())));
        }
        for f in rec.iter().take(p) {
            x.push(parse_field(f, line)?);
        }
        y.push(parse_field(&rec[p], line)?);
    }
    if y.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(RegressionInput {
        names: header.iter().take(p).map(str::to_string).collect(),
        x: Matrix::from_row_major(y.len(), p, x),
        y,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    /// Printed truncated to 5 decimals unless full precision is requested.
    Trunc5(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W, full_precision: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| format_cell(c, full_precision))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Array of `{column: value}` objects; numbers at full precision,
    /// non-finite numbers as the strings `inf`, `-inf`, `nan`.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(row) {
                        m.insert(c.to_string(), cell_json(v));
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.to_json()).map_err(|e| Error::Io(e.into()))?;
        writeln!(out)?;
        Ok(())
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(v) | Cell::Trunc5(v) => Number::from_f64(*v).map_or_else(|| Value::String(non_finite(*v)), Value::Number),
        Cell::Int(v) => Value::Number((*v).into()),
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Bool(b) => Value::Bool(*b),
    }
}

fn non_finite(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Reads back a number written by [`Table::to_json`].
pub fn json_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

pub fn format_cell(c: &Cell, full_precision: bool) -> String {
    match c {
        Cell::Num(v) => format_number(*v, full_precision),
        Cell::Trunc5(v) if full_precision || !v.is_finite() => format_number(*v, true),
        Cell::Trunc5(v) => format!("{:.5}", truncate5(*v)),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Bool(b) => b.to_string(),
    }
}

/// Truncation (not rounding) to 5 decimals of the value rounded to 7
/// decimals, so representation noise such as `0.56249999...` for `9/16`
/// does not drop the last digit.
pub fn truncate5(v: f64) -> f64 {
    ((v * 1e7).round() / 100.0).floor() / 1e5
}

/// 6 significant digits, or the shortest representation that round-trips.
pub fn format_number(v: f64, full_precision: bool) -> String {
    if !v.is_finite() {
        return non_finite(v);
    }
    if full_precision || v == 0.0 {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    format!("{rounded}")
}
