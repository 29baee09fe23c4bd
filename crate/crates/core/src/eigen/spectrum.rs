use crate::lattice::{LatticeGeometry, Provenance};
use crate::scalar::Real;

/// Energy window a partial spectrum was computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub lo: f64,
    pub hi: f64,
    /// Number of eigenvalues below `lo`.
    pub below: usize,
}

/// Sorted eigenvalues of one realization.
///
/// A full sample holds all `|Λ|` eigenvalues; a windowed sample holds only
/// those in `[window.lo, window.hi)`.
#[derive(Debug, Clone)]
pub struct SpectrumSample<T> {
    pub eigenvalues: Vec<T>,
    pub geometry: LatticeGeometry,
    pub provenance: Provenance,
    pub window: Option<SpectralWindow>,
}

impl<T: Real> SpectrumSample<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.is_none()
    }

    pub fn sites(&self) -> usize {
        self.geometry.sites()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v.as_f64()).collect()
    }

    /// Eigenvalues in `[lo, hi)`.
    pub fn in_interval(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|v| v.as_f64())
            .filter(|&v| v >= lo && v < hi)
            .collect()
    }

    /// `#{E_j <= e}`; only meaningful for full samples.
    pub fn count_le(&self, e: f64) -> usize {
        self.eigenvalues.partition_point(|v| v.as_f64() <= e)
    }
}

/// Spectrum plus unit eigenvectors stored column-major (`vectors[j*n..][..n]`
/// belongs to `spectrum.eigenvalues[j]`).
#[derive(Debug, Clone)]
pub struct EigenPairs<T> {
    pub spectrum: SpectrumSample<T>,
    pub vectors: Vec<T>,
}

impl<T: Real> EigenPairs<T> {
    pub fn order(&self) -> usize {
        self.spectrum.sites()
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[T] {
        let n = self.order();
        &self.vectors[j * n..(j + 1) * n]
    }

    pub fn value(&self, j: usize) -> T {
        self.spectrum.eigenvalues[j]
    }
}
