use std::path::PathBuf;

use numcore::NumError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Num(#[from] NumError),

    #[error("invalid encoder config: {0}")]
    Config(String),

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
pub struct EncoderConfig {
    pub n_blocks: usize,
    pub dim: usize,
    pub n_rbf: usize,
    /// Ångström; applies to bonded pairs.
    pub local_cutoff: f64,
    /// Ångström; 0 turns global message passing off.
    pub global_cutoff: f64,
    /// Embedding rows. Atomic numbers at or above this share row 0.
    pub n_species: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            n_blocks: 6,
            dim: 128,
            n_rbf: 16,
            local_cutoff: 3.0,
            global_cutoff: 5.0,
            n_species: 10,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::Config(m.to_string()));
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1");
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.n_rbf == 0 {
            return bad("n_rbf must be at least 1");
        }
        if !(self.local_cutoff > 0.0 && self.local_cutoff.is_finite()) {
            return bad("local_cutoff must be positive");
        }
        if !(self.global_cutoff >= 0.0 && self.global_cutoff.is_finite()) {
            return bad("global_cutoff must be non-negative");
        }
        if self.n_species < 2 {
            return bad("n_species must be at least 2");
        }
        Ok(())
    }

    /// Length of the concatenated per-block encoding.
    pub fn output_dim(&self) -> usize {
        self.n_blocks * self.dim
    }

    pub fn species_index(&self, z: u8) -> usize {
        let z = z as usize;
        if z < self.n_species {
            z
        } else {
            0
        }
    }
}
