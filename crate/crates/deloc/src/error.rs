use thiserror::Error;

use crate::qcore::Site;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown site {0}")]
    InvalidSite(Site),
    #[error("duplicate site label {0}")]
    DuplicateSite(Site),
    #[error("basis is not unitary on the measured subspace: {0}")]
    InvalidBasis(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{n} qubits exceed the dense cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("excitation number {k} out of range for block size {n}")]
    InvalidExcitation { n: usize, k: usize },
    #[error("invalid codeword pair: {0}")]
    InvalidCode(String),
    #[error("empty decomposition range: {0}")]
    EmptyDecomposition(String),
    #[error("cannot trace out {m} of {n} qubits")]
    InvalidTrace { n: usize, m: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid wire parameters: {0}")]
    InvalidWire(String),
    #[error("wire state has vanishing norm")]
    DegenerateWire,
    #[error("canonical decomposition failed: {0}")]
    CanonicalizationFailed(String),
    #[error("payload must be a single qubit, got {0} qubits")]
    InvalidPayload(usize),
    #[error("wire exhausted: {0}")]
    WireExhausted(String),
    #[error("protocol precondition violated: {0}")]
    Precondition(String),
    #[error("compensation station has no wire adding {0} sites")]
    StationInsufficient(usize),
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
