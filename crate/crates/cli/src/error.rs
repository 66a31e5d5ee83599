use rdlab::analytic::SeriesError;
use rdlab::dataset::DatasetError;
use rdlab::evaluation::EvalError;
use rdlab::fd::FdError;
use rdlab::mlp::MlpError;
use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("training diverged: {0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
            CliError::Divergence(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::NonConvergence { .. } | SeriesError::OutOfBounds { .. } => CliError::Numerical(e.to_string()),
            SeriesError::InvalidSpec(_) | SeriesError::OutOfDomain { .. } | SeriesError::InvalidOptions(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<FdError> for CliError {
    fn from(e: FdError) -> Self {
        match e {
            FdError::Series(s) => s.into(),
            FdError::Io(io) => io.into(),
            FdError::InvalidGrid(_) | FdError::OutOfDomain { .. } | FdError::DegenerateStudy(_) => {
                CliError::Usage(e.to_string())
            }
            FdError::SingularSystem { .. } | FdError::DimensionMismatch(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Series(s) => s.into(),
            DatasetError::Fd(f) => f.into(),
            DatasetError::Io(io) => io.into(),
            DatasetError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            DatasetError::MalformedFile { .. } => CliError::Io(e.to_string()),
            DatasetError::DegenerateFeature { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MlpError> for CliError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::NonFinite { .. } => CliError::Divergence(e.to_string()),
            MlpError::InvalidConfig(_) | MlpError::EmptySplit(_) => CliError::Usage(e.to_string()),
            MlpError::Io(io) => io.into(),
            MlpError::ShapeMismatch(_)
            | MlpError::VersionMismatch { .. }
            | MlpError::MalformedFile(_)
            | MlpError::MissingNorm => CliError::Io(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Mlp(m) => m.into(),
            EvalError::Series(s) => s.into(),
            EvalError::Dataset(d) => d.into(),
            EvalError::Io(io) => io.into(),
            EvalError::EmptyInput | EvalError::LengthMismatch(..) | EvalError::InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}
