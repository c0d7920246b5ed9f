use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DihedralOp;
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::network::ModelConfig;

/// Overrides the configured output directory.
pub const ENV_OUTPUT_DIR: &str = "SWINV2DNET_OUTPUT_DIR";
/// Overrides the configured seed.
pub const ENV_SEED: &str = "SWINV2DNET_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `lr0 * (1 - e / E)`.
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub root: PathBuf,
    pub train_split: String,
    pub val_split: String,
    /// Symmetries drawn from (uniformly, per sample) on the training split.
    /// Empty disables augmentation.
    pub augment: Vec<DihedralOp>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("data"),
            train_split: "train".into(),
            val_split: "val".into(),
            augment: DihedralOp::all().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub lr: f64,
    pub schedule: Schedule,
    pub epochs: usize,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub eval_threshold: f64,
    /// Validate every this many epochs (the last epoch is always validated).
    pub val_every: usize,
    pub output_dir: PathBuf,
    /// Serial data loading.
    pub deterministic: bool,
    pub optimizer: AdamConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lr: 5e-5,
            schedule: Schedule::Linear,
            epochs: 200,
            max_steps: None,
            batch_size: 4,
            eval_threshold: 0.5,
            val_every: 1,
            output_dir: PathBuf::from("runs/default"),
            deterministic: false,
            optimizer: AdamConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative dataset and output paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.data.root.is_relative() {
                cfg.data.root = dir.join(&cfg.data.root);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Applies the output-directory and seed environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Ok(seed) = std::env::var(ENV_SEED) {
            self.seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{ENV_SEED}=`{seed}` is not an integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.val_every == 0 {
            return Err(Error::config("epochs, batch_size and val_every must be at least 1"));
        }
        if !(self.eval_threshold > 0.0 && self.eval_threshold < 1.0) {
            return Err(Error::config("eval threshold must lie in (0, 1)"));
        }
        let o = &self.optimizer;
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return Err(Error::config("optimizer decay rates must lie in [0, 1) and eps be positive"));
        }
        self.model.validate()?;
        self.loss.validate()
    }
}

/// Learning rate of epoch `epoch` (0-based).
pub fn lr_schedule(epoch: usize, cfg: &RunConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::Schedule {
            epoch,
            epochs: cfg.epochs,
        });
    }
    Ok(match cfg.schedule {
        Schedule::Linear => cfg.lr * (1.0 - epoch as f64 / cfg.epochs as f64),
        Schedule::Constant => cfg.lr,
    })
}
