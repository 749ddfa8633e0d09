//! CSV tables and JSON summaries of a run.

use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::ExperimentConfig;
use super::{RunOutput, Table};
use crate::error::Result;

/// JSON schema every summary document validates against.
pub const RUN_SCHEMA: &str = include_str!("../../schema/run.schema.json");

/// The summary document: schema version, resolved config, metrics and
/// checks. `wall_ms` is only present when the caller asks for timing, so
/// untimed runs are byte-identical.
pub fn run_document(run: &RunOutput, resolved: &ExperimentConfig, csv: Option<&str>, wall_ms: Option<u64>) -> Result<serde_json::Value> {
    let mut doc = json!({
        "schema_version": super::SCHEMA_VERSION,
        "kind": run.kind,
        "config": resolved,
        "metrics": run.metrics,
        "checks": run.checks,
        "passed": run.passed(),
        "csv": csv,
    });
    if let Some(ms) = wall_ms {
        doc["wall_ms"] = json!(ms);
    }
    Ok(doc)
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/<prefix>.csv` (when the run has a table) and
/// `<dir>/<prefix>.json`; returns the paths written.
pub fn emit_outputs(run: &RunOutput, resolved: &ExperimentConfig, wall_ms: Option<u64>) -> Result<Vec<PathBuf>> {
    let dir = &resolved.output.dir;
    std::fs::create_dir_all(dir)?;
    let prefix = resolved.output.prefix.clone().unwrap_or_else(|| super::config::kind_name(run.kind).to_string());
    let mut written = Vec::new();
    let csv_name = match &run.table {
        Some(t) => {
            let name = format!("{prefix}.csv");
            let path = dir.join(&name);
            write_csv(t, &path)?;
            written.push(path);
            Some(name)
        }
        None => None,
    };
    let doc = run_document(run, resolved, csv_name.as_deref(), wall_ms)?;
    let path = dir.join(format!("{prefix}.json"));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
