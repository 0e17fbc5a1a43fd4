//! Built-in scenario presets, shipped as TOML embedded in the binary.

use crate::error::{CoreError, Result};
use crate::sim::config::ScenarioConfig;

const CHAIN_S1: &str = include_str!("../presets/chain-s1.toml");
const CHAIN_S2: &str = include_str!("../presets/chain-s2.toml");
const CHAIN_S3: &str = include_str!("../presets/chain-s3.toml");
const QUAD_INFINITY: &str = include_str!("../presets/quad-infinity.toml");

pub fn names() -> &'static [&'static str] {
    &["chain-s1", "chain-s2", "chain-s3", "quad-infinity"]
}

/// Raw TOML text of a preset, for override application.
pub fn raw(name: &str) -> Result<&'static str> {
    match name {
        "chain-s1" => Ok(CHAIN_S1),
        "chain-s2" => Ok(CHAIN_S2),
        "chain-s3" => Ok(CHAIN_S3),
        "quad-infinity" => Ok(QUAD_INFINITY),
        other => Err(CoreError::Config(format!(
            "unknown preset '{other}' (available: {})",
            names().join(", ")
        ))),
    }
}

pub fn load(name: &str) -> Result<ScenarioConfig> {
    let text = raw(name)?;
    ScenarioConfig::from_toml_str(text)
        .map_err(|e| CoreError::Config(format!("preset {name}: {}", e.join("; "))))
}
