//! Construction of the planetary Hamiltonian: configuration and units,
//! Fourier–Taylor expansion in Poincaré variables, reduction to the resonant
//! model, and its equilibrium/diagonalization.

mod config;
mod diag;
mod poincare;
mod resonant;

pub use config::{OrbitalConfig, PlanetParams, PoincareChart, PoincarePoint, G_AU_MSUN_YR, M_JUP_IN_MSUN};
pub use poincare::{build_expansion, perturbation_exact, ExpansionCaps, ExpansionDiagnostics, PoinKey, PoincareSeries};
pub use diag::{diagonalize, DiagonalizedModel};
pub use resonant::{
    find_equilibrium, resonant_chart_for, to_resonant_average, ReductionDiagnostics, ResKey,
    ResonantChart, ResonantSeries,
};
