use std::path::PathBuf;

/// Everything a command can fail with. The exit status is derived from the
/// variant: 2 for bad input, 3 for failed evaluation, 4 for numerical
/// divergence.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] margquant_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVALUATION: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use margquant_core::Error as E;
        match self {
            CliError::Core(E::Divergence { .. }) => EXIT_DIVERGENCE,
            CliError::Core(E::Evaluation { .. } | E::Endpoint { .. }) => EXIT_EVALUATION,
            _ => EXIT_CONFIG,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
