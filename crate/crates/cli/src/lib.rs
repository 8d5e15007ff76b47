pub mod commands;
pub mod config;
pub mod output;
mod setup;

use fitgeom::{Error, Result};

pub use config::{Cli, RunConfig};

/// Parses a RunConfig, or the `config` member of a summary.json.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let v = match v.get("config") {
        Some(inner) => inner.clone(),
        None => v,
    };
    Ok(serde_json::from_value(v)?)
}

/// Reads a RunConfig file, see [`parse_config`].
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config '{}': {e}", path.display())))?;
    parse_config(&text)
}
