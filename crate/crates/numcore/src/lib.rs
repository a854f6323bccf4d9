//! Minimal dense-tensor core with reverse-mode gradients.
//!
//! Computations are recorded eagerly on a [`Tape`]: every op evaluates its
//! value immediately and appends a record. Records are therefore stored in
//! topological order and [`Tape::backward`] walks them in reverse exactly once.
//!
//! Everything is generic over [`Scalar`] (`f32` for training, `f64` for
//! gradient checks and regression oracles).

mod checkpoint;
mod error;
mod gradcheck;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use checkpoint::{read_container, write_container, AnyTensor, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use error::NumError;
pub use gradcheck::{finite_diff_grad, forward_backward, relative_error};
pub use params::ParamStore;
pub use scalar::{DType, Scalar};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
