//! CSV tables and artifact files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// RFC 4180 CSV with a header line.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Paths written by one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub metadata: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>_summary.json` and `<stem>_metadata.json`
/// into `dir`. Only the metadata file carries run-specific data such as
/// the timestamp.
pub fn write_artifacts(
    dir: &Path,
    stem: &str,
    table: &Table,
    summary: &serde_json::Value,
    metadata: &serde_json::Value,
) -> Result<Artifacts> {
    fs::create_dir_all(dir)?;
    let art = Artifacts {
        csv: dir.join(format!("{stem}.csv")),
        summary: dir.join(format!("{stem}_summary.json")),
        metadata: dir.join(format!("{stem}_metadata.json")),
    };
    fs::write(&art.csv, table.to_csv()?)?;
    fs::write(&art.summary, serde_json::to_string_pretty(summary)? + "\n")?;
    fs::write(&art.metadata, serde_json::to_string_pretty(metadata)? + "\n")?;
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_quotes_and_terminates() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::from("x,y"), Cell::Empty]);
        t.push(vec![Cell::from(3usize), Cell::from(true)]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\r\n\"x,y\",\r\n3,true\r\n");
    }
}
