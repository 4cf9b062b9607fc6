//! File outputs: fixed-schema CSV, JSON reports and the append-only run log.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SEED_DERIVATION: &str =
    "run i uses splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15)";

/// Nine significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One line of `runs.jsonl`. Wall-clock time lives only here, never in
/// the reports, so reports stay byte-identical across repeats.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub seed_derivation: String,
    pub jobs: usize,
    pub wall_clock_seconds: f64,
    pub summary: serde_json::Value,
}

pub fn append_record(out: &Path, record: &RunRecord) -> Result<()> {
    let path = out.join("runs.jsonl");
    let line = serde_json::to_string(record).map_err(|e| CliError::Serialize(e.to_string()))?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(&path, e))?;
    writeln!(f, "{line}").map_err(|e| CliError::io(&path, e))
}
