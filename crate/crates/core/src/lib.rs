//! Simulation toolkit for single-photon blockade in a driven two-mode Kerr
//! microresonator with a movable scattering nanotip.
//!
//! The crate is organized in layers:
//!
//! * [`fock`] - truncated two-mode Fock basis and dense operator algebra,
//! * [`model`] - system parameters, tip scattering/loss laws, Hamiltonian,
//! * [`liouville`] - Lindblad superoperator, steady states, photon
//!   correlations (including two-time correlations via quantum regression),
//! * [`analytic`] - weak-drive amplitude hierarchy, closed-form correlation
//!   formulas and tip-placement condition solvers,
//! * [`sweep`] / [`figures`] - parameter sweeps, the backscattering-immunity
//!   efficiency ratio, and canned figure-reproduction runs with CSV output.
//!
//! Rates are dimensionless throughout, measured in units of the intrinsic
//! linewidth `gamma_1` of the clockwise mode; lengths keep laboratory units
//! (tip-surface gap in nm, tip azimuthal offset in um). Conversions to
//! physical rates are quarantined in [`model::PhysicalConstants`].

extern crate blas_src;

pub mod analytic;
pub mod error;
pub mod expm;
pub mod figures;
pub mod fock;
pub mod liouville;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, Mode, OperatorMatrix, TwoModeBasis};
pub use model::{PhysicalConstants, SystemParams, TipGeometry, TipModel};

/// Shorthand used pervasively for complex matrix elements.
pub type C64 = num_complex::Complex64;
