//! CSV results with a versioned schema line.
//!
//! Layout:
//!
//! ```text
//! #schema=outcr.siso.v1
//! eta,gamma0,capacity_bits
//! 1.00000000000e-1,1.05360515658e-1,1.03777369839e0
//! ```
//!
//! Reals use 12 significant digits in scientific notation so that parsing a
//! file and printing it again reproduces it byte for byte.

use std::fmt::Write as _;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Real(x) => fmt_real(*x),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// `{:.11e}` for finite values; `NaN`, `inf`, `-inf` otherwise.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // Avoid printing "-0.00000000000e0".
        format!("{:.11e}", if x == 0.0 { 0.0 } else { x })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            schema: format!("outcr.{command}.v1"),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#schema={}", self.schema);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Results file read back as strings, with numeric access.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTable {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let schema = lines
            .next()
            .and_then(|l| l.strip_prefix("#schema="))
            .ok_or_else(|| CliError::Config("results file does not start with #schema=".into()))?
            .to_string();
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Config("results file has no header row".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(CliError::Config(format!("row has {} cells, header has {}", row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { schema, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell `(row, name)` as a real; `None` if the column is missing or the
    /// cell is not numeric.
    pub fn real(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }

    pub fn text(&self, row: usize, name: &str) -> Option<&str> {
        Some(self.rows.get(row)?.get(self.column(name)?)?.as_str())
    }
}
