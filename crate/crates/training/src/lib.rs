//! Training loops for the encoder and the in-context model, with the loss
//! curriculum, context shuffling, Adam, EMA and plateau learning-rate decay.

mod config;
mod curriculum;
mod icl_train;
mod metrics;
mod optim;
mod pretrain;

pub use config::{DataConfig, IclTrainConfig, PretrainConfig, RunConfig};
pub use curriculum::{curriculum_bounds, curriculum_weights, shuffle_context, CurriculumState, Ramp};
pub use icl_train::{context_mae, train_icl, ContextExamples, IclOutcome};
pub use metrics::{EpochMetrics, MetricsLog};
pub use optim::{Adam, Ema, PlateauScheduler};
pub use pretrain::{pretrain_encoder, PretrainOutcome};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0}")]
    Empty(&'static str),

    #[error("molecule `{0}` is missing from the encodings cache")]
    CacheMiss(String),

    #[error("molecule `{0}` has no label")]
    MissingLabel(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFinite { epoch: usize, step: usize, detail: String },

    #[error("invalid training config: {0}")]
    Config(String),

    #[error(transparent)]
    Num(#[from] numcore::NumError),

    #[error(transparent)]
    Encoder(#[from] encoder::EncoderError),

    #[error(transparent)]
    Model(#[from] icl::IclError),

    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}
