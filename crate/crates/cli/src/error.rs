use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] hcopt::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}
