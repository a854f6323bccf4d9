use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    /// Shape mismatch, tagged with the op kind and the index of the record
    /// that would have been appended to the tape.
    #[error("dimension error in `{op}` (record #{record}): {detail}")]
    Shape {
        op: &'static str,
        record: usize,
        detail: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
