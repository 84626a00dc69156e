use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use mirm_core::{MirmError, Result};

/// A CSV table; every row has one cell per header column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn real(x: f64) -> String {
    format!("{x:?}")
}

fn write_csv<W: Write>(table: &Table, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| MirmError::InvalidInput(format!("csv: {e}"));
    w.write_record(&table.header).map_err(io)?;
    for r in &table.rows {
        if r.len() != table.header.len() {
            return Err(MirmError::InvalidInput("row does not match the header".into()));
        }
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the table to `path`, or to stdout when no path is given.
pub fn emit_csv(table: &Table, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_csv(table, File::create(p)?),
        None => write_csv(table, io::stdout().lock()),
    }
}
