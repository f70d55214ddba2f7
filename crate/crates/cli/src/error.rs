use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] totalstab::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Attaches the config field to expression and dimension errors.
pub fn in_field<T>(r: totalstab::Result<T>, field: &str) -> Result<T, CliError> {
    r.map_err(|e| match e {
        totalstab::Error::Expr(_) | totalstab::Error::Dimension(_) => CliError::Config(format!("{field}: {e}")),
        other => other.into(),
    })
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(totalstab::Error::Expr(_) | totalstab::Error::Dimension(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}
