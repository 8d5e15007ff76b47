use std::fmt::Display;
use std::fs;
use std::path::Path;

use fitgeom::{Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// One CSV table.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Table {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal; Rust's float `Display` never uses exponents.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Everything a command produces.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub result: Value,
    pub grid: Option<Value>,
    pub table: Table,
    pub graph: Option<String>,
    pub witness: Option<String>,
    /// Additional files, by name.
    pub files: Vec<(String, String)>,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write '{}': {e}", path.display()))
}

pub fn summary(cfg: &RunConfig, a: &Artifacts, timestamp: u64) -> Value {
    let mut s = json!({
        "tool": "fitgeom",
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp,
        "command": cfg.command.name(),
        "config": cfg,
        "result": a.result,
    });
    if let Some(g) = &a.grid {
        s["grid"] = g.clone();
    }
    s
}

pub fn write(cfg: &RunConfig, a: &Artifacts) -> Result<()> {
    let dir = &cfg.common.out;
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let timestamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut text = serde_json::to_string_pretty(&summary(cfg, a, timestamp))?;
    text.push('\n');
    let path = dir.join("summary.json");
    fs::write(&path, text).map_err(|e| io(&path, e))?;

    let path = dir.join("samples.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::InvalidInput(format!("cannot write '{}': {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    w.write_record(&a.table.header).map_err(csv_err)?;
    for r in &a.table.rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io(&path, e))?;

    let extra = a
        .graph
        .iter()
        .map(|g| ("graph.json".to_string(), g.clone()))
        .chain(a.witness.iter().map(|w| ("witness.json".to_string(), w.clone())))
        .chain(a.files.iter().cloned());
    for (name, body) in extra {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
