//! The JSON run configuration: dataset handling, hyperparameters, output
//! layout. Flags override file values; unknown keys are rejected so typos
//! fail loudly instead of silently training with defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wigcn::{Error, InputFormat, PropagationVariant, Result, TrainConfig};

fn default_k_core() -> usize {
    10
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_d() -> usize {
    64
}
fn default_n_layers() -> usize {
    3
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_lambda_reg() -> f64 {
    1e-5
}
fn default_batch_size() -> usize {
    1024
}
fn default_epochs() -> usize {
    10
}
fn default_seed() -> u64 {
    42
}
fn default_leaky_slope() -> f64 {
    0.2
}
fn default_eval_k() -> usize {
    20
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One experiment, start to finish. Only `dataset_path` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub dataset_format: InputFormat,
    /// Keep only users and items with at least this many interactions.
    #[serde(default = "default_k_core")]
    pub k_core: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_n_layers")]
    pub n_layers: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda_reg")]
    pub lambda_reg: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Drives the split, the initialization and the batch sampler.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_leaky_slope")]
    pub leaky_slope: f64,
    #[serde(default)]
    pub variant: PropagationVariant,
    /// Ranking cutoff for evaluation and recommendation.
    #[serde(default = "default_eval_k")]
    pub eval_k: usize,
    /// Where `train` writes history and checkpoints.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Extra checkpoint every this many epochs; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Command-line overrides, applied on top of the file.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        variant: Option<PropagationVariant>,
        k: Option<usize>,
    ) {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(variant) = variant {
            self.variant = variant;
        }
        if let Some(k) = k {
            self.eval_k = k;
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            d: self.d,
            n_layers: self.n_layers,
            learning_rate: self.learning_rate,
            lambda_reg: self.lambda_reg,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            leaky_slope: self.leaky_slope,
            variant: self.variant,
        }
    }
}
