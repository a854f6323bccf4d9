use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MolError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("molecule `{id}`: {msg}")]
    Validation { id: String, msg: String },

    #[error("molecule `{id}` has no heavy atoms")]
    EmptyGraph { id: String },
}
