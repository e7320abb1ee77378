//! Training configuration as a flat `key=value` file.
//!
//! Recognized keys: `epochs`, `batch_size`, `lr`, `mu`, `seed`, `sparse`,
//! `shuffle`. Omitted keys keep their defaults; unknown keys are errors so
//! typos do not silently train with defaults. `#` starts a comment.

use std::path::Path;

use prescript_core::TrainConfig;

use crate::error::CliError;
use crate::Result;

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let body = std::fs::read_to_string(path)?;
    let mut cfg = TrainConfig::default();
    for (i, raw) in body.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(pos) => raw[..pos].trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::parse(path, lineno, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| CliError::parse(path, lineno, format!("{key}: expected {what}, got {value:?}"));
        match key {
            "epochs" => cfg.epochs = value.parse().map_err(|_| bad("a positive integer"))?,
            "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("a positive integer"))?,
            "lr" => cfg.lr = value.parse().map_err(|_| bad("a number"))?,
            "mu" => cfg.mu = value.parse().map_err(|_| bad("a number"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "sparse" => cfg.sparse = value.parse().map_err(|_| bad("true or false"))?,
            "shuffle" => cfg.shuffle = value.parse().map_err(|_| bad("true or false"))?,
            _ => {
                return Err(CliError::parse(path, lineno, format!("unknown key {key:?}")));
            }
        }
    }
    Ok(cfg)
}
