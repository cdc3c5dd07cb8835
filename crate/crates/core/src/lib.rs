//! Normal-form machinery for resonant planetary Hamiltonians.
//!
//! The crate builds the planar three-body Hamiltonian in Poincaré variables,
//! reduces it to the 3:1 resonant model of HD60532, averages over the fast
//! libration angle (resonant Birkhoff normal form), introduces action-angle
//! coordinates adapted to the integrable approximation, runs a translation-free
//! Kolmogorov normalization with Newton calibration of the initial shift, and
//! finally certifies the decay of the generating-function norms at desk scale.

pub mod adapt;
pub mod birkhoff;
pub mod converge;
pub mod dynamics;
pub mod error;
pub mod hambuild;
pub mod kolmogorov;
pub mod orbit;
pub mod pseries;

pub use error::{Error, Result};
