use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::partitioning::PartitionMethod;

/// Optional TOML defaults. Every key mirrors a command-line flag; flags win.
///
/// ```toml
/// seed = 7
/// workers = 4
/// output_dir = "out"
/// alphabet = 8
/// depth = 1
/// lag = 1
/// lags = [1, 2, 5, 10]
/// smoothing = 0.001
/// method = "max_entropy"
/// prune_threshold = 0.0
/// draws = 10000
/// train_fraction = 0.5
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub alphabet: Option<usize>,
    pub depth: Option<usize>,
    pub lag: Option<usize>,
    pub lags: Option<Vec<usize>>,
    pub smoothing: Option<f64>,
    pub method: Option<PartitionMethod>,
    pub prune_threshold: Option<f64>,
    pub draws: Option<usize>,
    pub train_fraction: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}
