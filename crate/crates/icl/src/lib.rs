//! In-context regression model.
//!
//! A context of `k` molecules becomes the token sequence
//! `[s_1, l_1, s_2, l_2, …]`, where `s_i` is the selected (linearly reduced)
//! encoding of molecule `i` and `l_i` the embedding of its label. A causal
//! transformer reads the sequence and a linear head applied at every
//! structure token predicts the label that follows it.

mod checkpoint;
mod config;
mod model;
mod standardize;

pub use checkpoint::{load_model, save_model};
pub use config::{IclConfig, IclError};
pub use model::{assemble_sequence, forward_icl, masked_loss, predict, select, IclOutputs, IclParams, TokenSequence};
pub use standardize::Standardizer;
