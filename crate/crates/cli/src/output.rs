//! CSV results and their metadata sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::experiment::ResultTable;

pub fn write_csv<W: std::io::Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

/// Writes `table` to `path` with a header row, even when empty.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(table, file)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub name: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub trials: u64,
    pub version: String,
    pub rows: usize,
    pub wall_clock_seconds: f64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

pub fn write_metadata(meta: &Metadata, csv_path: &Path) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    let text = toml::to_string(meta).expect("metadata serializes");
    std::fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
