use std::path::{Path, PathBuf};

use encoder::EncoderConfig;
use icl::IclConfig;
use serde::{Deserialize, Serialize};

use crate::{Ramp, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub ema_decay: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { lr: 1e-4, epochs: 900, batch_size: 64, warmup_steps: 1000, ema_decay: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IclTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_sequences: usize,
    /// Optimizer steps per curriculum stage.
    pub period: usize,
    pub ramp: Ramp,
    pub patience_epochs: usize,
    pub lr_floor: f64,
    /// Reorder each context's molecules every epoch.
    pub shuffle: bool,
}

impl Default for IclTrainConfig {
    fn default() -> Self {
        IclTrainConfig {
            lr: 1e-3,
            epochs: 2500,
            batch_sequences: 16,
            period: 600,
            ramp: Ramp::Linear,
            patience_epochs: 100,
            lr_floor: 1e-5,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub contexts: Option<PathBuf>,
    pub validation_contexts: Option<PathBuf>,
    pub encodings: Option<PathBuf>,
}

/// Everything a config file may set. Missing sections take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub model: IclConfig,
    pub pretrain: PretrainConfig,
    pub icl: IclTrainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::File { path: path.to_path_buf(), msg: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| TrainError::File { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.encoder.validate()?;
        self.model.validate()?;
        let p = &self.pretrain;
        if !p.lr.is_finite() || p.lr <= 0.0 || p.batch_size == 0 || !(0.0..=1.0).contains(&p.ema_decay) {
            return Err(TrainError::Config("pretrain needs lr > 0, batch_size ≥ 1 and ema_decay in [0, 1]".into()));
        }
        let i = &self.icl;
        if !i.lr.is_finite() || i.lr <= 0.0 || i.batch_sequences == 0 || i.period == 0 {
            return Err(TrainError::Config("icl needs lr > 0, batch_sequences ≥ 1 and period ≥ 1".into()));
        }
        if !(i.lr_floor >= 0.0 && i.lr_floor < i.lr) {
            return Err(TrainError::Config(format!("lr_floor {} must be below lr {}", i.lr_floor, i.lr)));
        }
        Ok(())
    }
}
