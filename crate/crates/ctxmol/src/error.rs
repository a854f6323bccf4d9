use std::path::Path;

use thiserror::Error;

/// Failure of a pipeline step, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    /// Prefixes a data error with the file it came from.
    pub fn at(self, path: &Path) -> CliError {
        match self {
            CliError::Data(m) if !m.contains(&*path.to_string_lossy()) => CliError::Data(format!("{}: {m}", path.display())),
            e => e,
        }
    }
}

fn num(e: &numcore::NumError) -> CliError {
    match e {
        numcore::NumError::NonFinite(_) => CliError::Numeric(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

impl From<numcore::NumError> for CliError {
    fn from(e: numcore::NumError) -> Self {
        num(&e)
    }
}

impl From<molgraph::MolError> for CliError {
    fn from(e: molgraph::MolError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<mining::MiningError> for CliError {
    fn from(e: mining::MiningError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<encoder::EncoderError> for CliError {
    fn from(e: encoder::EncoderError) -> Self {
        match &e {
            encoder::EncoderError::Num(n) => num(n),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<icl::IclError> for CliError {
    fn from(e: icl::IclError) -> Self {
        match &e {
            icl::IclError::Num(n) => num(n),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<training::TrainError> for CliError {
    fn from(e: training::TrainError) -> Self {
        use training::TrainError as T;
        match e {
            T::NonFinite { .. } => CliError::Numeric(e.to_string()),
            T::Num(n) => num(&n),
            T::Encoder(x) => x.into(),
            T::Model(x) => x.into(),
            T::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<baselines::BaselineError> for CliError {
    fn from(e: baselines::BaselineError) -> Self {
        match e {
            baselines::BaselineError::Model(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}
