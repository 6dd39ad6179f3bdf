//! Sequence-generation statistics of bounded-memory classical machines and of
//! qudits sent through entanglement-breaking (measure-and-prepare) channels.
//!
//! * [`model`]: classical machines, EB channels, instruments and validation.
//! * [`prob`]: sequence probabilities and the effective classical model.
//! * [`constructions`]: one-way, cyclic, equiangular-tight-frame and dephased
//!   models, and deterministic complexity.
//! * [`classicality`]: reductions of channels with commuting states or POVMs.
//! * [`optimize`]: Adam search over quantum and classical models.
//! * [`appendix`]: the published best models for L = 4 and 5.

pub mod appendix;
pub mod classicality;
pub mod constructions;
pub mod error;
pub mod json;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod prob;
pub mod random;

pub use error::{Error, Result};
pub use linalg::{Complex64, ComplexMatrix, ComplexVector};
pub use model::{
    choi_matrix, validate_channel, validate_classical, validate_quantum, ClassicalModel, EbChannel,
    Instrument, QuantumModel, Sequence, ValidationReport,
};
pub use prob::{classical_sequence_prob, effective_classical_model, quantum_sequence_prob};
