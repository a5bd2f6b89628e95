use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code: 1 for configuration and input problems, 2 when the
    /// numerical pipeline itself fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<ifprony::Error> for CliError {
    fn from(e: ifprony::Error) -> Self {
        use ifprony::Error as E;
        match e {
            E::InvalidMode(_)
            | E::InvalidSignal(_)
            | E::InvalidParameter(_)
            | E::ShapeMismatch { .. }
            | E::LengthMismatch(..) => CliError::Config(e.to_string()),
            E::CoefficientUnderflow { .. } | E::Singular(_) | E::RootFinding(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
