//! Geometry-aware graph encoder.
//!
//! Node states start from an element embedding and are refined by `B`
//! residual blocks. Each block sends messages along bonds and between all
//! atom pairs inside a global cutoff, both filtered by a Gaussian expansion of
//! the interatomic distance. After every block the node states are sum-pooled
//! into one vector per molecule; the `B` pooled vectors are the molecule's
//! representation.

mod cache;
mod config;
mod features;
mod model;
mod rbf;

pub use cache::{load_encodings, save_encodings, EncodingCache};
pub use config::{EncoderConfig, EncoderError};
pub use features::{GraphBatch, MolFeatures};
pub use model::{
    encode, encode_all, encode_batch, forward, pretrain_readout, readout, BlockEncodings, EncoderParams,
};
pub use rbf::{cosine_envelope, rbf_expand};
