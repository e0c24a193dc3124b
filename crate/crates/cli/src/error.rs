use std::path::PathBuf;

/// Failure of a CLI command, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent config; the message carries `file:line:col`.
    #[error("{0}")]
    Schema(String),
    /// A model rejected its input.
    #[error("domain error in {}", .0)]
    Model(#[from] thz_umimo::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
