//! Summary document and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::analysis::Assertion;
use crate::error::{ErrorObject, Result};
use crate::scenario::Violation;
use crate::table::Table;

pub const SCHEMA: &str = "gat-summary/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub name: String,
    pub kind: String,
    pub status: Status,
    pub files: Vec<String>,
    pub elapsed_seconds: f64,
    pub metrics: Value,
    pub assertions: Vec<Assertion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorObject>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub n_paths: i64,
    pub status: Status,
    pub exit_code: i32,
    pub elapsed_seconds: f64,
    pub warnings: Vec<Violation>,
    pub analyses: Vec<AnalysisSummary>,
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| ErrorObject::io(path, e))
}

pub fn write_table(dir: &Path, file: &str, table: &Table) -> Result<()> {
    write_atomic(&dir.join(file), table.to_csv_string().as_bytes())
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    write_atomic(&dir.join("summary.json"), text.as_bytes())
}
