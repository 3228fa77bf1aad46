//! `--config file.json` support. Keys of the JSON object become flags
//! spliced in after the subcommand; keys the user also passes on the
//! command line are dropped, so command-line flags win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use serde_json::Value;

const SUBCOMMANDS: [&str; 9] = [
    "rsn",
    "optimize-times",
    "optimize-alpha",
    "curve",
    "product-function",
    "decay-fit",
    "table1",
    "schedule-fit",
    "spectrum",
];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Converts a config object to flags: `snake_case` keys become
/// `--kebab-case`, `true` becomes a bare flag, `false` and `null` are
/// dropped and arrays are comma-joined.
pub fn flags_from_config(value: &Value, given: &[String]) -> Result<Vec<OsString>> {
    let Value::Object(map) = value else {
        bail!("config file must hold a JSON object");
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if key == "config" || given.contains(&flag) {
            continue;
        }
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Array(items) => {
                let parts: Result<Vec<String>> = items
                    .iter()
                    .map(|i| match i {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        other => bail!("config key {key:?}: unsupported array entry {other}"),
                    })
                    .collect();
                out.push(flag.into());
                out.push(parts?.join(",").into());
            }
            Value::Object(_) => bail!("config key {key:?}: nested objects are not flags"),
        }
    }
    Ok(out)
}

/// Returns `argv` with the config file's flags spliced in right after the
/// subcommand name.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.to_string_lossy()))?;
    let given: Vec<String> = argv
        .iter()
        .skip(1)
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.starts_with("--").then(|| s.split('=').next().unwrap_or_default().to_string())
        })
        .collect();
    let flags = flags_from_config(&value, &given)?;
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .unwrap_or(argv.len());
    let mut out = argv[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
