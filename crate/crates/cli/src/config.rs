//! Experiment configuration.
//!
//! A run is described by one [`ExperimentConfig`]. It can come from a JSON file
//! (`--config`), from the `# config:` line of an earlier artifact, or from flags;
//! flags win over the file. The resolved config is echoed into every artifact.

use std::fs;
use std::path::Path;

use mflab::patterns::Counter;
use mflab::pretense::SearchConfig;
use mflab::FunctionSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PatternMode {
    Sign,
    Residue,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<FunctionSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<u64>>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oversample: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<PatternMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counters: Option<Vec<Counter>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_dependent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stall_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Read a JSON config, or the config echoed in an artifact's header.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let json = if text.trim_start().starts_with('#') {
            text.lines()
                .find_map(|l| l.strip_prefix("# config: "))
                .ok_or_else(|| CliError::Parse(format!("{}: artifact has no `# config:` line", path.display())))?
                .to_string()
        } else {
            text
        };
        serde_json::from_str(&json).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("missing required setting `{name}`")))
    }
}
