//! Numeric tables and their CSV encoding.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses back
//! to the same `f64`. Missing values are empty fields.

use std::io::Write;
use std::path::Path;

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `name` as floats; `None` for missing cells.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[c] {
                    Cell::Float(v) => Some(v),
                    Cell::Int(v) => Some(v as f64),
                    Cell::Missing => None,
                })
                .collect(),
        )
    }
}

fn format_cell(cell: Cell) -> Option<String> {
    match cell {
        Cell::Float(v) if !v.is_finite() => None,
        Cell::Float(v) => Some(format!("{v:.16e}")),
        Cell::Int(v) => Some(v.to_string()),
        Cell::Missing => Some(String::new()),
    }
}

/// Encode a table; fails on the first non-finite value.
pub fn encode_csv(table: &Table) -> Result<Vec<u8>, (usize, usize)> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.header).expect("in-memory write");
    for (i, row) in table.rows.iter().enumerate() {
        let fields: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, &c)| format_cell(c).ok_or((i, j)))
            .collect::<Result<_, _>>()?;
        w.write_record(&fields).expect("in-memory write");
    }
    Ok(w.into_inner().expect("in-memory flush"))
}

/// Write `table` to `path` as CSV.
pub fn emit_csv(table: &Table, path: &Path) -> Result<(), RunError> {
    let bytes = encode_csv(table).map_err(|(i, j)| {
        RunError::Numerical {
            context: format!("writing {}", path.display()),
            source: chainsim_core::Error::InvalidState(format!(
                "non-finite value in column `{}`, data row {}",
                table.header[j],
                i + 1
            )),
        }
    })?;
    let mut f = std::fs::File::create(path).map_err(|e| RunError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| RunError::io(path, e))?;
    Ok(())
}

/// Parse a file written by [`emit_csv`]. Integer-looking fields come back as
/// [`Cell::Int`].
pub fn read_csv(path: &Path) -> Result<Table, RunError> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(|e| csv_io(path, e))?;
    let header = r.headers().map_err(|e| csv_io(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(Cell::Missing)
                } else if let Ok(i) = s.parse::<i64>() {
                    Ok(Cell::Int(i))
                } else {
                    s.parse::<f64>().map(Cell::Float)
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn csv_io(path: &Path, e: csv::Error) -> RunError {
    RunError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
