//! Linear-regression readouts fitted inside each context: the examples before
//! the last one are the training set, the last one is predicted.

mod lstsq;
mod readout;

pub use lstsq::{fit_minnorm, LinearFit};
pub use readout::{ablation_predict, context_features, predict_last, BaselineError, RegressionMode};
