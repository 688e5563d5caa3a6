//! Embedded reference configurations and config loading.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use ps2f_core::config::{ConfigSpec, Ps2fConfig};
use ps2f_core::model::SystemModel;

/// Double integrator with an ellipsoidal terminal set derived at load time.
pub const CASE1_JSON: &str = include_str!("../configs/case1.json");
/// Unicycle with a terminal equality.
pub const CASE3_JSON: &str = include_str!("../configs/case3.json");

fn read(path: Option<&Path>, default: &str) -> Result<(String, String)> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok((text, p.display().to_string()))
        }
        None => Ok((default.to_string(), "the embedded config".to_string())),
    }
}

/// Reads `path`, or parses `default` when no path is given.
pub fn load(path: Option<&Path>, default: &str) -> Result<Ps2fConfig> {
    let (text, name) = read(path, default)?;
    Ps2fConfig::from_json(&text).with_context(|| format!("parsing {name}"))
}

/// The unresolved spec, before any derived quantity is computed.
pub fn load_spec(path: Option<&Path>, default: &str) -> Result<ConfigSpec> {
    let (text, name) = read(path, default)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {name}"))
}

/// Physical sample time, when the model has one.
pub fn sample_time(cfg: &Ps2fConfig) -> Option<f64> {
    match cfg.model {
        SystemModel::Unicycle { ts } => Some(ts),
        _ => None,
    }
}
