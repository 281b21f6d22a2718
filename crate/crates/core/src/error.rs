//! Crate-wide error type.
//!
//! Engine errors are deliberately flat: sweeps catch them per grid point and
//! record a status instead of aborting, while the CLI maps them onto its
//! exit-code contract (config 2, solver 3, no-solution 4).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Basis lookup with photon numbers outside the truncation.
    #[error("fock index ({m}, {n}) out of range for n_max = {n_max}")]
    IndexOutOfRange { m: usize, n: usize, n_max: usize },

    /// Operator algebra on matrices of different dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Requested Liouvillian exceeds the configured dense-size limit.
    #[error("superoperator dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    /// The bordered steady-state system is singular: the Liouvillian null
    /// space is not one-dimensional.
    #[error("steady state is degenerate (null space dimension > 1)")]
    DegenerateSteadyState,

    /// Linear solve or propagation produced an unusable state.
    #[error("solver failed to converge: {0}")]
    NoConvergence(String),

    /// Correlation normalization with an empty mode.
    #[error("mean photon number below 1e-14; g^(n) undefined")]
    ZeroPhotonNumber,

    /// Matrix exponential or time propagation broke down.
    #[error("propagation failed: {0}")]
    PropagationFailure(String),

    /// Closed-form expression evaluated at a pole.
    #[error("closed form at resonant pole: |eta1 eta2 Delta2| = {0:.3e}")]
    ResonantPole(f64),

    /// Weak-drive hierarchy matrix is singular.
    #[error("effective-Hamiltonian hierarchy is singular at level {level}")]
    SingularHierarchy { level: usize },

    /// A condition solver found no root in the requested window.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// Efficiency ratio against a non-blockading reference.
    #[error("ideal reference is not blockading (1 - g2 <= 0)")]
    IdealNotBlockading,

    /// Efficiency ratio outside its physical range.
    #[error("efficiency ratio {0} outside [0, 1.01]")]
    RatioOutOfRange(f64),

    /// Bad user-facing input (config values, axis names, malformed grids).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
