//! CSV output. Reals are written with Rust's shortest round-trip formatting,
//! in exponent form when very small or very large.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Real(v) => {
                let a = v.abs();
                if a != 0.0 && !(1e-5..1e16).contains(&a) {
                    write!(f, "{v:e}")
                } else {
                    write!(f, "{v}")
                }
            }
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }
}

/// Writes `table` with a header row and returns the number of bytes written.
pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<u64> {
    if let Some((k, row)) = table
        .rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != table.columns.len())
    {
        return Err(Error::Domain(format!(
            "row {k} has {} cells but the table has {} columns",
            row.len(),
            table.columns.len()
        )));
    }
    let mut counter = Counting {
        inner: out,
        bytes: 0,
    };
    {
        let mut writer = csv::Writer::from_writer(&mut counter);
        writer.write_record(&table.columns)?;
        for row in &table.rows {
            writer.write_record(row.iter().map(|c| c.to_string()))?;
        }
        writer.flush()?;
    }
    Ok(counter.bytes)
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<u64> {
    let mut file = BufWriter::new(File::create(path)?);
    let n = write_csv(table, &mut file)?;
    file.flush()?;
    Ok(n)
}

struct Counting<W> {
    inner: W,
    bytes: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        let n = write_csv(&Table::new(&["x", "rho"]), &mut buf).unwrap();
        assert_eq!(buf, b"x,rho\n");
        assert_eq!(n, 6);
    }

    #[test]
    fn reals_round_trip() {
        let mut t = Table::new(&["v"]);
        t.push(vec![0.1.into()]);
        t.push(vec![(1.0f64 / 3.0).into()]);
        t.push(vec![9.769962616701378e-16.into()]);
        t.push(vec![(-2.5e20).into()]);
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0.1");
        assert_eq!(lines[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(lines[3], "9.769962616701378e-16");
        assert_eq!(lines[4], "-2.5e20");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0.into()]);
        assert!(write_csv(&t, Vec::new()).is_err());
    }

    #[test]
    fn text_is_quoted_when_needed() {
        let mut t = Table::new(&["s"]);
        t.push(vec!["a,b".into()]);
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        assert_eq!(buf, b"s\n\"a,b\"\n");
    }
}
