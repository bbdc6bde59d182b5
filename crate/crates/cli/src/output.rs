//! Output destinations; files are written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pentagram_core::report::{sig17, to_json_string};
use serde_json::Value;
use tempfile::NamedTempFile;

use crate::{CliError, Format};

/// Explicit path, else `<dir>/<command>.<ext>` under the default output
/// directory, else stdout.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(output: Option<PathBuf>, dir: Option<PathBuf>, command: &str, format: Format) -> Self {
        let path = output.or_else(|| dir.map(|d| d.join(format!("{command}.{}", format.extension()))));
        Sink { path }
    }

    pub fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.path {
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
                Ok(())
            }
            Some(p) => write_atomic(p, text),
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn json(v: &Value) -> Result<String, CliError> {
    to_json_string(v).map_err(|e| CliError::Internal(e.to_string()))
}

/// One CSV cell per JSON scalar; floats get 17 significant digits.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => sig17(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn csv(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

/// CSV of flat JSON objects, columns in the order of `keys`.
pub fn csv_objects(keys: &[&str], rows: &[Value]) -> Result<String, CliError> {
    let header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| keys.iter().map(|k| cell(&r[*k])).collect())
        .collect();
    csv(&header, &body)
}
