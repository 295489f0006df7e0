use std::fs;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use transpath::CarbonParams;

use crate::commands::{load_params, Outcome};
use crate::Cli;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: String,
    /// Parameters after command-line overrides; `--config` accepts this file.
    pub params: Option<CarbonParams>,
    pub seed: u64,
    pub out: String,
    pub workers: Option<usize>,
    pub version: String,
    pub duration_s: f64,
    pub status: String,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Write `manifest.json` into the output directory, creating it if needed.
pub fn write(cli: &Cli, outcome: Option<&crate::commands::Outcome>, status: &str, elapsed: Duration) -> Result<()> {
    let c = &cli.common;
    let params = match outcome {
        Some(Outcome { params: Some(p), .. }) => Some(*p),
        _ => load_params(&c.config).ok(),
    };
    let m = RunManifest {
        command: cli.command.name().into(),
        argv: std::env::args().collect(),
        config: c.config.display().to_string(),
        params,
        seed: c.seed,
        out: c.out.display().to_string(),
        workers: c.workers,
        version: env!("CARGO_PKG_VERSION").into(),
        duration_s: elapsed.as_secs_f64(),
        status: status.into(),
        files: outcome.map(|o| o.files.iter().map(|f| f.display().to_string()).collect()).unwrap_or_default(),
        summary: outcome.map(|o| o.summary.clone()).unwrap_or(Value::Null),
    };
    fs::create_dir_all(&c.out)?;
    let path = c.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
