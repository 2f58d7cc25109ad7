use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: |H[{row}][{col}] - conj(H[{col}][{row}])| = {violation:.3e}")]
    NotHermitian {
        row: usize,
        col: usize,
        violation: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid spin: {0}")]
    InvalidSpin(String),

    #[error("invalid angular momentum arguments: {0}")]
    InvalidQuantumNumbers(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("not a projector: {0}")]
    NotProjector(String),

    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("unknown state label `{0}`")]
    UnknownLabel(String),

    #[error("no dynamics: {0}")]
    NoDynamics(String),

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Configuration-class errors map to CLI exit status 2, invariant
    /// failures to 3, everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownLabel(_)
            | Error::UnknownFigure(_)
            | Error::InvalidParams(_)
            | Error::InvalidTimeGrid(_)
            | Error::InvalidSpin(_)
            | Error::InvalidQuantumNumbers(_) => 2,
            Error::Invariant(_)
            | Error::NotHermitian { .. }
            | Error::InvalidDensityMatrix(_)
            | Error::NotProjector(_)
            | Error::NoDynamics(_) => 3,
            _ => 1,
        }
    }
}
