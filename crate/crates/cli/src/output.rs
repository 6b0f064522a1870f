//! CSV and JSON emission. Every JSON summary embeds the resolved config and
//! the crate version; CSV files are UTF-8, comma-separated, '.' decimal.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::CliError;

/// Common envelope of every JSON summary.
#[derive(Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: Option<u64>,
    pub strict: bool,
    pub config: &'a Config,
    pub result: T,
}

pub fn write_json<T: Serialize>(path: &Path, summary: &Summary<'_, T>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Output(format!("JSON encoding: {e}")))?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)
        .map_err(|e| CliError::Output(format!("CSV encoding: {e}")))?;
    for row in rows {
        wtr.write_record(row)
            .map_err(|e| CliError::Output(format!("CSV encoding: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| CliError::Output(format!("CSV encoding: {e}")))?;
    fs::write(path, bytes)
        .map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Shortest round-trip decimal representation; deterministic across runs.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
