//! Pipeline glue for in-context molecular property regression: evaluation
//! reports, the synthetic benchmark, and the command-line front end.

pub mod cli;
mod error;
pub mod eval;
pub mod pipeline;

pub use error::CliError;
