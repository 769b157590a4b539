//! Minimal CSV layer for the tool's artifacts.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every f64 exactly; integers and short labels are written
//! bare. No quoting: cells must not contain commas or line breaks, which
//! the writer enforces.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Float(v) => {
                let _ = write!(out, "{v:.16e}");
            }
            Cell::Text(s) => out.push_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.header.iter().enumerate() {
            assert!(
                !name.contains(',') && !name.contains('\n'),
                "unquotable header {name:?}"
            );
            if i > 0 {
                out.push(',');
            }
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if let Cell::Text(s) = cell {
                    assert!(
                        !s.contains(',') && !s.contains('\n'),
                        "unquotable cell {s:?}"
                    );
                }
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header_line = match lines.next() {
            Some(l) => l,
            None => bail!("empty CSV"),
        };
        let header: Vec<String> = header_line.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<Cell> = line
                .split(',')
                .map(|tok| {
                    if let Ok(v) = tok.parse::<i64>() {
                        Cell::Int(v)
                    } else if let Ok(v) = tok.parse::<f64>() {
                        Cell::Float(v)
                    } else {
                        Cell::Text(tok.to_string())
                    }
                })
                .collect();
            if cells.len() != header.len() {
                bail!(
                    "line {}: {} cells, header has {}",
                    lineno + 2,
                    cells.len(),
                    header.len()
                );
            }
            rows.push(cells);
        }
        Ok(Self { header, rows })
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Column values as f64 (text cells skipped as NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[idx].as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}
