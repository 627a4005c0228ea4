use std::path::PathBuf;

use biotvem::VemError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:{}", .0.iter().map(|i| format!("\n  - {i}")).collect::<String>())]
    Invalid(Vec<String>),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {}: {source}", path.display())]
    Toml { path: PathBuf, source: Box<toml::de::Error> },
    #[error("level {level}: largest relative residual {residual:.3e} exceeds the tolerance {tol:.3e}")]
    Residual { level: usize, residual: f64, tol: f64 },
    #[error("level {level}: {source}")]
    Level { level: usize, source: VemError },
    #[error(transparent)]
    Vem(#[from] VemError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for unusable input, 1 for failed runs.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Toml { .. } | CliError::Read { .. } => 2,
            _ => 1,
        }
    }
}
