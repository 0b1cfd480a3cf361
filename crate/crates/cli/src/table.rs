//! CSV tables with a header row. Numeric cells that are not finite are
//! written as `nonfinite` and counted, so callers can turn them into failures.

use std::path::Path;

use thiserror::Error;

pub const NONFINITE: &str = "nonfinite";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row has {got} cells, header has {want}")]
    Width { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "true" } else { "false" }.to_owned())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:e}"),
            Cell::Num(_) => NONFINITE.to_owned(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn is_bad(&self) -> bool {
        matches!(self, Cell::Num(v) if !v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), TableError> {
        if row.len() != self.header.len() {
            return Err(TableError::Width { got: row.len(), want: self.header.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Number of non-finite numeric cells.
    pub fn nonfinite_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_bad()).count()
    }

    /// Writes the table and returns the number of non-finite cells.
    pub fn write(&self, path: &Path) -> Result<usize, TableError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(self.nonfinite_count())
    }
}

/// `t` and `τ = log t` cells.
pub fn time_cells(t: f64) -> [Cell; 2] {
    [Cell::Num(t), Cell::Num(t.ln())]
}
