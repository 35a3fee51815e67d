//! Flat JSON config files. Every key mirrors a long flag; flags win.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateFile {
    pub tle: Option<PathBuf>,
    pub regime: Option<String>,
    pub fractions: Option<Vec<f64>>,
    pub preset: Option<String>,
    pub step: Option<u64>,
    pub duration: Option<u64>,
    pub start: Option<String>,
    pub seed: Option<u64>,
    pub consensus: Option<String>,
    pub approvers: Option<usize>,
    pub verifiers: Option<usize>,
    pub closeness: Option<String>,
    pub geojson: Option<bool>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MetricsFile {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub closeness: Option<String>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConsensusFile {
    pub edges: Option<PathBuf>,
    pub timestamp: Option<String>,
    pub fraction: Option<f64>,
    pub strategy: Option<String>,
    pub approvers: Option<usize>,
    pub verifiers: Option<usize>,
    pub tamper: Option<Vec<u32>>,
    pub payload: Option<String>,
    pub seed: Option<u64>,
    pub fallback: Option<bool>,
    pub transcript: Option<PathBuf>,
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Writes the merged settings next to the outputs.
pub fn echo<T: Serialize>(effective: &T, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("effective_config.json");
    let text = serde_json::to_string_pretty(effective).map_err(|e| CliError::internal(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
