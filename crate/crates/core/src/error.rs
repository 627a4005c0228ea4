use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("polynomial degree {0} is not supported (need k >= 2)")]
    UnsupportedOrder(usize),
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("ill-conditioned local problem: {0}")]
    Conditioning(String),
    #[error("interface traces do not match: {0}")]
    Mismatch(String),
    #[error("mesh refinement failed: {0}")]
    Refinement(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("boundary condition setup: {0}")]
    Config(String),
    #[error("form is only defined on {expected} cells (cell {cell})")]
    WrongSubdomain { cell: usize, expected: &'static str },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("exact field unavailable for case `{0}`")]
    Unavailable(String),
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = VemError> = std::result::Result<T, E>;
