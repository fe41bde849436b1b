use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("duplicate site index {0} in Pauli string")]
    DuplicateSite(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: max entry defect {0:e}")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("self-adjoint eigensolver did not converge")]
    EigenNonConvergence,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "ground state is {multiplicity}-fold degenerate; use a symmetry-resolved \
         or field-split model (e.g. MFIC with B != 0)"
    )]
    DegenerateGroundState { multiplicity: usize },

    #[error("no excited state couples to the ground state through V")]
    NoCoupledExcitation,

    #[error("off-diagonal weight of V in the eigenbasis vanishes")]
    VanishingOffDiagonal,

    #[error("closed forms assume B != 0 and B != +-2J (got B = {b}, J = {j})")]
    ExcludedField { b: f64, j: f64 },

    #[error("transfer-matrix eigenvalues are degenerate ({0} vs {1})")]
    DegenerateTransferEigenvalues(f64, f64),

    #[error("driving rate must be positive, got {rate} at lambda = {lambda}")]
    NonPositiveRate { rate: f64, lambda: f64 },

    #[error(
        "step halving did not converge after {halvings} halvings \
         (last change in final fidelity {last_change:e}, step {step:e})"
    )]
    IntegratorNonConvergence {
        halvings: usize,
        last_change: f64,
        step: f64,
    },

    #[error("quadrature did not converge after {doublings} doublings (last change {last_change:e})")]
    QuadratureNonConvergence { doublings: usize, last_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
