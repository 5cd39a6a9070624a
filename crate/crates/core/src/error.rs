use thiserror::Error;

use crate::qsim::Backend;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=14")]
    QubitCount(usize),

    #[error("gate target {target} out of range for {n_qubits} qubits")]
    TargetOutOfRange { target: usize, n_qubits: usize },

    #[error("trainable parameter index {index} out of range for {len} parameters")]
    ParamIndex { index: usize, len: usize },

    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("operation requires the {required:?} backend")]
    BackendMismatch { required: Backend },

    #[error("dimension mismatch: state has {state} qubits, observable expects {observable}")]
    ShapeMismatch { state: usize, observable: usize },

    #[error("cannot amplitude-encode the all-zero vector")]
    ZeroVector,

    #[error("input of length {len} exceeds capacity of {n_qubits} qubits")]
    Capacity { len: usize, n_qubits: usize },

    #[error("noise strength {0} outside [0, 1]")]
    NoiseStrength(f64),

    #[error("encoded circuit requires an input vector")]
    MissingInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("IDX format error: {0}")]
    IdxFormat(String),

    #[error("insufficient data: needed {needed} examples of class {class}, found {found}")]
    InsufficientData {
        class: u8,
        needed: usize,
        found: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
