//! Tidy CSV output: one `#` provenance line, a header row, then data rows.
//! Floats carry 17 significant digits; lines end in LF.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A value in a CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
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

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// A table whose first comment line records the tool version, the
    /// configuration hash and the master seed.
    pub fn new(header: Vec<&'static str>, config_hash: &str, seed: u64) -> Self {
        Self {
            comments: vec![format!(
                "gridfilter {} config_hash={config_hash} seed={seed}",
                env!("CARGO_PKG_VERSION")
            )],
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            s.push_str("# ");
            s.push_str(c);
            s.push('\n');
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.render().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut t = Table::new(vec!["L_S", "value", "pass"], "abc", 7);
        t.push(vec![4usize.into(), 0.1.into(), true.into()]);
        let text = t.render();
        let lines: Vec<&str> = text.split('\n').collect();
        assert!(lines[0].starts_with("# gridfilter ") && lines[0].ends_with("config_hash=abc seed=7"));
        assert_eq!(lines[1], "L_S,value,pass");
        assert_eq!(lines[2], "4,1.0000000000000001e-1,true");
        assert_eq!(lines[3], "");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }
}
