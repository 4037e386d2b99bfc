//! Settings resolution: built-in defaults, then the `[command]` table of the
//! config file, then flags given on the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Top-level keys of a config file; everything else lives in a per-command table.
const GLOBAL_KEYS: [&str; 2] = ["seed", "out"];

pub struct Global {
    pub seed: u64,
    pub out: PathBuf,
}

pub fn read_config(path: Option<&Path>) -> Result<Table, CliError> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Seed and output path: flag, else config file, else default.
pub fn resolve_global(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    default_out: &str,
) -> Result<Global, CliError> {
    let seed = match (seed, file.get("seed")) {
        (Some(s), _) => s,
        (None, Some(Value::Integer(s))) if *s >= 0 => *s as u64,
        (None, Some(v)) => {
            return Err(CliError::Usage(format!(
                "config seed must be a non-negative integer, got {v}"
            )))
        }
        (None, None) => 0,
    };
    let out = match (out, file.get("out")) {
        (Some(p), _) => p,
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(v)) => {
            return Err(CliError::Usage(format!(
                "config out must be a string, got {v}"
            )))
        }
        (None, None) => PathBuf::from(default_out),
    };
    Ok(Global { seed, out })
}

/// Merges defaults, the `[section]` table of the config file and the flags
/// that were actually passed, then deserializes the result.
pub fn resolve<S, F>(file: &Table, section: &str, flags: &F) -> Result<S, CliError>
where
    S: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = Table::try_from(S::default()).map_err(|e| CliError::Usage(e.to_string()))?;
    for (key, value) in file {
        if GLOBAL_KEYS.contains(&key.as_str()) {
            continue;
        }
        if key == section {
            let Value::Table(t) = value else {
                return Err(CliError::Usage(format!(
                    "config entry [{section}] must be a table"
                )));
            };
            merged.extend(t.clone());
        } else if !value.is_table() {
            return Err(CliError::Usage(format!(
                "unknown top-level config key `{key}`"
            )));
        }
    }
    let flags = Table::try_from(flags).map_err(|e| CliError::Usage(e.to_string()))?;
    merged.extend(flags);
    Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("[{section}]: {}", e.message())))
}

/// Writes `seed`, `out` and the command table as TOML.
pub fn write_snapshot<S: Serialize>(
    path: &Path,
    section: &str,
    g: &Global,
    settings: &S,
) -> Result<(), CliError> {
    let mut root = Table::new();
    root.insert("seed".into(), Value::Integer(g.seed as i64));
    root.insert("out".into(), Value::String(g.out.display().to_string()));
    let body = Table::try_from(settings).map_err(|e| CliError::Usage(e.to_string()))?;
    root.insert(section.into(), Value::Table(body));
    let text = toml::to_string(&root).map_err(|e| CliError::Usage(e.to_string()))?;
    ensure_parent(path)?;
    fs::write(path, text)?;
    Ok(())
}

/// Snapshot path for a command whose output is a single file:
/// `data.jsonl` gets `data.config.toml` beside it.
pub fn snapshot_beside(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.config.toml"))
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}
