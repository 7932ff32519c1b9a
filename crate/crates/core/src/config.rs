//! TOML experiment configuration: parsing, `key=value` overrides and a
//! stable digest of the resolved config.
//!
//! ```toml
//! strategy = "ozic"        # required: zic | ozic | nzi | onzi
//! n_buyers = 100
//! n_sellers = 100
//! seed = 7
//!
//! [od]
//! model = "ra"             # bc | ra | rd
//! mu = 0.5
//! pe = 0.5
//! uncertainty_range = [0.2, 2.0]
//!
//! [market]
//! periods = 10
//! period_seconds = 240
//!
//! [session]
//! shift_midpoint = true
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::session::ExperimentConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("`{key}` out of range: {message}")]
    OutOfRange { key: String, message: String },
    #[error("bad override `{0}`, expected key=value")]
    BadOverride(String),
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(path, &[])
}

/// Reads a config file and applies dotted `key=value` overrides before
/// resolving defaults.
pub fn parse_config_with(
    path: impl AsRef<Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    if !table.contains_key("strategy") {
        return Err(ConfigError::MissingKey("strategy".into()));
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| classify_serde_error(e.message()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn classify_serde_error(msg: &str) -> ConfigError {
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return ConfigError::UnknownKey(rest[..end].to_string());
        }
    }
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return ConfigError::MissingKey(rest[..end].to_string());
        }
    }
    ConfigError::Parse(msg.to_string())
}

/// Sets `a.b.c = value` in the table. The value is read as a TOML literal,
/// falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(item.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(item.to_string()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride(item.to_string()))?;
    }
    cursor.insert(leaf.to_string(), value);
    Ok(())
}

/// SHA-256 over the canonical JSON form of a resolved config. Field order is
/// fixed by the struct, so key order in the source file does not matter.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serialises");
    hex::encode(Sha256::digest(&canonical))
}
