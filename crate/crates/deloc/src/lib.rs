//! Delocalized storage and transport of quantum information.
//!
//! Everything is checked against a small dense statevector engine ([`qcore`]).
//! [`dicke`] covers permutation-symmetric block encodings, [`wire`] the
//! two-dimensional period-wire MPS family, [`protocols`] the measurement-based
//! upload/download/transport/cut/merge suite on top of them, [`lognet`] small
//! networks of encoded qubits and [`expcli`] the batch experiment runner.

pub mod dicke;
pub mod error;
pub mod expcli;
pub mod lognet;
pub mod protocols;
pub mod qcore;
pub mod wire;

pub use error::{Error, Result};
pub use qcore::{C64, Site};
