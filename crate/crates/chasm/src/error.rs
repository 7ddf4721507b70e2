use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum ChasmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("advection shift |alpha| = {0} exceeds one cell; reduce tau or refine the grid")]
    CflViolation(f64),

    #[error("spectral result has imaginary residue {residue:.3e} (limit {limit:.3e}); {context}")]
    ImaginaryResidue {
        residue: f64,
        limit: f64,
        context: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad file format: {0}")]
    BadFormat(String),
}

pub type Result<T> = std::result::Result<T, ChasmError>;
