//! Thermal quantum speed limits and adiabatic-fidelity bounds for driven
//! spin chains, with exact diagonalization cross-checked against
//! transfer-matrix closed forms.

pub mod closed_form;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod operator;
pub mod qsl;
pub mod susceptibility;
pub mod thermal;
pub mod verify;

pub use error::{Error, Result};
pub use models::{ModelKind, ModelOperators, SpinChainModel};
pub use operator::{DensityMatrix, HermitianOperator, Pauli, SpectralDecomposition};
