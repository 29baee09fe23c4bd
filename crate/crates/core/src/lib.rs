//! Random Schrödinger operators on the lattice: finite-volume assembly,
//! spectra, integrated density of states and local eigenvalue statistics.

pub mod eigen;
pub mod error;
pub mod estimates;
pub mod harness;
pub mod ids;
pub mod lattice;
pub mod reduction;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Hamiltonian = lattice::HamiltonianMatrix<f64>;
pub type Spectrum = eigen::SpectrumSample<f64>;
pub type Eigenpairs = eigen::EigenPairs<f64>;
