use thiserror::Error;

/// Errors surfaced by the command-line tool, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed data, configuration or arguments (exit 2).
    #[error("input error: {0}")]
    Input(String),
    /// The path solver failed (exit 3).
    #[error("solver error: {0}")]
    Solver(String),
    /// No admissible model to select (exit 4).
    #[error("selection error: {0}")]
    Selection(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Selection(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
