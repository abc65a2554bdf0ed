use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::commands::CliError;
use crate::Common;

/// Header and rows of a CSV export.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    fn write<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// JSON to `--out` (or stdout); CSV next to it with `--csv`, or on stdout
/// in place of the JSON when no `--out` is given.
pub fn emit<T: Serialize>(common: &Common, report: &T, table: impl FnOnce() -> Table) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    match &common.out {
        Some(path) => {
            std::fs::write(path, json)?;
            if common.csv {
                table().write(std::fs::File::create(Path::new(path).with_extension("csv"))?)?;
            }
        }
        None => {
            if common.csv {
                table().write(std::io::stdout().lock())?;
            } else {
                std::io::stdout().lock().write_all(json.as_bytes())?;
            }
        }
    }
    Ok(())
}
