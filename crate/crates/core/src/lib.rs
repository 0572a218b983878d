//! Nearest Pauli channel extraction for approximate gate implementations.
//!
//! Given an implementation of a target gate `U₀` (a dense unitary, a dense
//! superoperator, or a weighted ensemble of unitaries), the toolkit builds
//! the error relative to `U₀`, expands it over Pauli strings, and returns the
//! Pauli channel closest to it in the normalized Frobenius metric, together
//! with how much coherent error that channel cannot capture.

pub mod channel;
pub mod cli;
pub mod error;
pub mod extraction;
pub mod generators;
pub mod model_io;
pub mod pauli;
pub mod settings;

pub use channel::{
    adjoint_channel, channel_distance, channel_from_oracle, channel_inner, check_physicality, compose,
    entanglement_fidelity, lift_unitary, PhysicalityReport, SuperOperator,
};
pub use error::{Error, Result};
pub use extraction::{
    coefficient_matrix, coherent_residual, diagonal_weights_via_fidelity, error_channel, error_unitary,
    extract_from_channel, extract_from_unitary, leakage_project, nearest_pauli_channel, pauli_coefficient_via_bitstrings,
    pauli_coefficients, CoefficientMatrix, Diagnostics, Extraction, LeakageSpec, PauliNoiseModel,
};
pub use generators::{
    average_channel, gen_ez, gen_overrotated_cz, gen_pauli_channel, gen_random_unitary, EnsembleMember,
};
pub use pauli::{frobenius_inner, materialize, pauli_basis, DenseOperator, PauliLabel};
pub use settings::Settings;

pub use num_complex::Complex64;
