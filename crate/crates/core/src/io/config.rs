//! Plain `key = value` config files. `#` starts a comment; keys are the
//! field names of [`TrainConfig`].

use std::path::Path;

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Parses `key = value` lines, rejecting malformed lines and duplicates.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
        }
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(Error::InvalidConfig(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Applies a config text on top of `cfg`.
pub fn apply_config(cfg: &mut TrainConfig, text: &str) -> Result<()> {
    for (k, v) in parse_pairs(text)? {
        cfg.set(&k, &v)?;
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let bytes = super::read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidConfig(format!("{} is not UTF-8", path.display())))?;
    let mut cfg = TrainConfig::default();
    apply_config(&mut cfg, &text)?;
    Ok(cfg)
}

/// Renders every field, one per line, in [`TrainConfig::KEYS`] order.
pub fn render_config(cfg: &TrainConfig) -> String {
    TrainConfig::KEYS
        .iter()
        .map(|k| format!("{k} = {}\n", cfg.get(k).expect("known key")))
        .collect()
}
