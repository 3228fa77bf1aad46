//! Tables, manifests and writing them out.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Rows of already formatted cells under a header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV text with a leading `# manifest-sha256:` comment line.
    pub fn to_csv(&self, hash: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
        Ok(format!("# manifest-sha256: {hash}\n{body}"))
    }
}

/// Shortest representation that parses back to the same `f64`; scientific
/// notation outside `[1e-4, 1e16)`. NaN becomes an empty cell.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        String::new()
    } else if a == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn text(x: impl Display) -> String {
    x.to_string()
}

/// Everything a command produced.
#[derive(Debug)]
pub struct Report {
    /// Main table, written to `--out` in CSV mode.
    pub table: Table,
    /// Companion tables written to `<out stem>.<suffix>.csv`.
    pub extra: Vec<(&'static str, Table)>,
    /// Written to `--out` in JSON mode.
    pub json: Value,
    pub converged: bool,
    /// Characteristic time used to scale times, if any.
    pub t0: Option<f64>,
}

impl Report {
    pub fn new(table: Table, json: Value) -> Self {
        Self {
            table,
            extra: Vec::new(),
            json,
            converged: true,
            t0: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub tool_version: String,
    pub run_sha256: String,
    pub outputs: Vec<PathBuf>,
    pub wall_time_seconds: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

/// SHA-256 of the canonical JSON of what determines a run: command,
/// resolved parameters and tool version.
pub fn run_hash(command: &str, parameters: &Value) -> String {
    let identity = serde_json::json!({
        "command": command,
        "parameters": parameters,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let digest = Sha256::digest(identity.to_string().as_bytes());
    hex::encode(digest)
}

fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes the report to `out` (or stdout) and, for file output, the
/// manifest beside it.
pub fn emit(
    report: &Report,
    command: &str,
    parameters: Value,
    seed: u64,
    format: Format,
    out: Option<&Path>,
    elapsed: Duration,
) -> Result<()> {
    let hash = run_hash(command, &parameters);
    let main = match format {
        Format::Csv => report.table.to_csv(&hash)?,
        Format::Json => {
            let mut doc = serde_json::json!({ "manifest_sha256": hash });
            doc["result"] = report.json.clone();
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    let Some(out) = out else {
        std::io::stdout().lock().write_all(main.as_bytes())?;
        return Ok(());
    };
    let mut outputs = vec![out.to_path_buf()];
    fs::write(out, main).with_context(|| format!("writing {}", out.display()))?;
    if format == Format::Csv {
        for (suffix, table) in &report.extra {
            let path = companion_path(out, suffix);
            fs::write(&path, table.to_csv(&hash)?).with_context(|| format!("writing {}", path.display()))?;
            outputs.push(path);
        }
    }
    let manifest = RunManifest {
        command: command.to_string(),
        parameters,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        run_sha256: hash,
        outputs,
        wall_time_seconds: elapsed.as_secs_f64(),
        converged: report.converged,
        t0: report.t0,
    };
    let path = manifest_path(out);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
