//! JSON run configuration. Any flag may be given here; command-line flags
//! take precedence over file values.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub checkpoints: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub replicates: Option<usize>,
    pub stages: Option<usize>,
    pub margin: Option<f64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub length: Option<usize>,
    pub process: Option<String>,
    pub chain: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub plugin: Option<String>,
    pub cap: Option<usize>,
    pub csv: Option<PathBuf>,
    pub n: Option<Vec<usize>>,
    pub width: Option<f64>,
    pub epsilon: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag value, else file value.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}
