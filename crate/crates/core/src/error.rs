use thiserror::Error;

use crate::qstate::MAX_QUBITS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("register too large: {0} qubits requested, at most {MAX_QUBITS} supported")]
    RegisterTooLarge(usize),

    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("partial trace needs a non-empty keep set")]
    EmptyKeepSet,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("outcome has zero probability: {0}")]
    ZeroProbability(String),

    #[error("purification starved: {0}")]
    PurificationStarved(String),
}

pub type Result<T> = std::result::Result<T, Error>;
