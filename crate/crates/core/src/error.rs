use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("qubit count {0} is outside the supported range 1..={max}", max = crate::statevector::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit index {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid nucleotide symbol {0:?}")]
    InvalidSymbol(char),

    #[error("empty sequence")]
    EmptySequence,

    #[error("sequence length {length} exceeds the exact edit-distance cap of {max}")]
    SequenceTooLong { length: usize, max: usize },

    #[error("edit-distance search exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("ground-truth tie in triplet {index}: d_ab = d_ac = {distance}")]
    GroundTruthTie { index: usize, distance: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("statistics need at least 2 runs, got {0}")]
    InsufficientRuns(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
