//! Discrete constant-modulus beam codeword synthesis for full-duplex
//! sensing with self-interference suppression.
//!
//! The solvers maximize the sensing SINR over phase-quantized RX and TX
//! codewords, optionally under a communication-gain constraint on the TX
//! codeword. See [`optimize`] for the entry points.

pub mod channel;
pub mod flops;
pub mod numerics;
pub mod phase_grid;
pub mod problem;
pub mod optimize;
pub mod search;
pub mod harness;

pub use flops::FlopCounter;
pub use numerics::{HermitianMatrix, UpperTriangular};
pub use phase_grid::{Codeword, PhaseGrid};
