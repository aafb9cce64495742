//! CSV tables with JSON metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Output {
    dir: PathBuf,
    command: String,
    config: RunConfig,
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip form; NaN becomes an empty cell.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl Output {
    pub fn new(dir: PathBuf, command: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self { dir, command: command.into(), config: config.clone() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn header(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
        })
    }

    /// Write `name` as CSV and `name.json` with the schema version, the
    /// resolved config, the column list and any extra metadata.
    pub fn table(&self, name: &str, columns: &[&str], rows: &[Vec<String>], extra: Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(columns).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        let mut meta = self.header();
        meta["file"] = json!(name);
        meta["columns"] = json!(columns);
        meta["rows"] = json!(rows.len());
        if let Value::Object(m) = extra {
            for (k, v) in m {
                meta[k] = v;
            }
        }
        self.write_json_value(&format!("{name}.json"), meta)?;
        Ok(path)
    }

    /// A JSON document carrying the schema version and config next to `body`.
    pub fn document<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let mut v = self.header();
        v["result"] = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
        self.write_json_value(name, v)
    }

    fn write_json_value(&self, name: &str, v: Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(&v).map_err(|e| io(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        Ok(path)
    }
}
