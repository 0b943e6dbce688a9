//! Deterministic result files: CSV tables plus a JSON metadata sidecar.
//!
//! Every float is rendered with 17 significant digits in scientific
//! notation, which round-trips `f64` exactly, so re-running a sweep with the
//! same seed yields byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Fixed-width scientific rendering with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a numeric table as CSV: a header row, then one line per row with
/// `.`-decimal floats, comma separators and `\n` line endings.
pub fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::parameter(format!(
                "row width {} does not match {} columns",
                row.len(),
                columns.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty-printed JSON; object keys are emitted in sorted order, so
/// the bytes are deterministic.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `dir/name.csv` and `dir/name.meta.json` path pair.
pub fn table_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}.csv")),
        dir.join(format!("{name}.meta.json")),
    )
}
