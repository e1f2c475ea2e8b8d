//! Output artifacts: CSV tables and the JSON run summary.

use crate::config::RunConfig;
use crate::stats::TrialAccount;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Identifier of the summary format.
pub const SCHEMA_ID: &str = "gafzero-summary/1";

/// JSON Schema of the run summary.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

/// A CSV table with a header row; rows are written in the given order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form; empty for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// The JSON summary written next to every CSV artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub trials: u64,
    pub discards: u64,
    pub discard_rate: f64,
    pub valid: bool,
    pub estimates: Value,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn new(config: &RunConfig, account: Option<TrialAccount>, estimates: Value) -> Self {
        let (trials, discards, rate, valid) = match account {
            Some(a) => (a.trials, a.discards.total(), a.discard_rate, a.valid),
            None => (0, 0, 0.0, true),
        };
        Self {
            schema: SCHEMA_ID,
            version: env!("CARGO_PKG_VERSION"),
            command: config.command.clone(),
            config: config.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            trials,
            discards,
            discard_rate: rate,
            valid,
            estimates,
            artifacts: Vec::new(),
            wall_time_s: 0.0,
        }
    }
}

/// Writes `<command>[_<name>].csv` for every table and `<command>.json`;
/// returns the paths written.
pub fn write_run(
    dir: &Path,
    summary: &mut Summary,
    tables: &[(String, Table)],
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    summary.artifacts.clear();
    for (name, table) in tables {
        let file = if name.is_empty() {
            format!("{}.csv", summary.command)
        } else {
            format!("{}_{name}.csv", summary.command)
        };
        let path = dir.join(&file);
        table.write(&path).map_err(std::io::Error::other)?;
        summary.artifacts.push(file);
        written.push(path);
    }
    let path = dir.join(format!("{}.json", summary.command));
    let json = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    std::fs::write(&path, json + "\n")?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn schema_is_valid_json() {
        let v: Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
        assert_eq!(v["properties"]["schema"]["const"], SCHEMA_ID);
    }
}
