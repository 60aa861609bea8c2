//! `--config` TOML file. Keys are the long flag names; values set here win
//! over the command line.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub time_col: Option<String>,
    pub value_col: Option<String>,
    pub train_fraction: Option<f64>,
    pub no_normalize: Option<bool>,
    pub window: Option<usize>,
    pub model: Option<String>,
    pub adapter_timeout: Option<f64>,
    pub features: Option<String>,
    pub block_length: Option<usize>,
    pub block_swap: Option<usize>,
    pub samples: Option<usize>,
    pub ma_window: Option<usize>,
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub bandwidth: Option<f64>,
    pub ridge: Option<f64>,
    pub queries: Option<usize>,
    pub iterations: Option<usize>,
    pub dataset: Option<String>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

pub fn overlay<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}
