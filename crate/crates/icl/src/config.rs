use std::path::PathBuf;

use numcore::NumError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IclError {
    #[error(transparent)]
    Num(#[from] NumError),

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("{0}")]
    Shape(String),

    #[error("loss weights sum to zero")]
    ZeroWeights,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IclConfig {
    pub dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Longest token sequence, `2k` for contexts of `k` molecules.
    pub max_positions: usize,
    /// Length of the concatenated encoder output.
    pub input_dim: usize,
    /// Pre-norm layer normalization in every block and before the head.
    pub layer_norm: bool,
    pub mlp_ratio: usize,
}

impl Default for IclConfig {
    fn default() -> Self {
        IclConfig {
            dim: 128,
            n_layers: 12,
            n_heads: 4,
            max_positions: 20,
            input_dim: 768,
            layer_norm: true,
            mlp_ratio: 4,
        }
    }
}

impl IclConfig {
    pub fn validate(&self) -> Result<(), IclError> {
        let bad = |m: String| Err(IclError::Config(m));
        if self.dim == 0 || self.n_heads == 0 || !self.dim.is_multiple_of(self.n_heads) {
            return bad(format!("dim {} must be a positive multiple of n_heads {}", self.dim, self.n_heads));
        }
        if self.max_positions < 2 {
            return bad("max_positions must be at least 2".into());
        }
        if self.input_dim == 0 || self.mlp_ratio == 0 {
            return bad("input_dim and mlp_ratio must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.n_heads
    }
}
