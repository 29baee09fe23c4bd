//! Symmetric eigensolvers and eigenvalue counting for finite-volume
//! Hamiltonians.
//!
//! Full spectra come from Householder reduction plus implicit QL on a dense
//! copy. Counting and windowed spectra work on a banded copy in folded site
//! order and never form the dense matrix.

mod band;
mod dense;
mod spectrum;
mod window;

pub use band::{BandLu, BandedOperator, PivotPolicy};
pub use dense::{symmetric_eigenpairs, symmetric_eigenvalues, tridiagonal_ql, tridiagonalize, MAX_SWEEPS};
pub use spectrum::{EigenPairs, SpectralWindow, SpectrumSample};

use crate::error::{Error, Result};
use crate::lattice::HamiltonianMatrix;
use crate::scalar::Real;

fn sample<T: Real>(h: &HamiltonianMatrix<T>, eigenvalues: Vec<T>, window: Option<SpectralWindow>) -> SpectrumSample<T> {
    SpectrumSample {
        eigenvalues,
        geometry: h.geometry().clone(),
        provenance: h.provenance().clone(),
        window,
    }
}

/// All eigenvalues with multiplicity, ascending.
pub fn eigenvalues_symmetric<T: Real>(h: &HamiltonianMatrix<T>) -> Result<SpectrumSample<T>> {
    let values = symmetric_eigenvalues(h.to_dense(), h.order())?;
    Ok(sample(h, values, None))
}

/// All eigenvalues and an orthonormal eigenbasis.
pub fn eigenpairs_symmetric<T: Real>(h: &HamiltonianMatrix<T>) -> Result<EigenPairs<T>> {
    let (values, vectors) = symmetric_eigenpairs(h.to_dense(), h.order())?;
    Ok(EigenPairs { spectrum: sample(h, values, None), vectors })
}

/// `#{λ <= E}` by Sylvester inertia.
pub fn count_below<T: Real>(h: &HamiltonianMatrix<T>, energy: f64) -> Result<usize> {
    Ok(counts_below(h, &[energy])?[0])
}

/// [`count_below`] at several energies sharing one banded copy.
pub fn counts_below<T: Real>(h: &HamiltonianMatrix<T>, energies: &[f64]) -> Result<Vec<usize>> {
    if let Some(&e) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::Precondition(format!("energy {e} is not finite")));
    }
    BandedOperator::new(h).counts_below(energies)
}

fn check_window(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::InvertedInterval(lo, hi));
    }
    Ok(())
}

/// Eigenvalues in `[lo, hi)`, ascending, by bisection.
pub fn eigenvalues_in_interval<T: Real>(h: &HamiltonianMatrix<T>, lo: f64, hi: f64) -> Result<SpectrumSample<T>> {
    check_window(lo, hi)?;
    let op = BandedOperator::new(h);
    Ok(windowed(h, &op, lo, hi))
}

fn windowed<T: Real>(h: &HamiltonianMatrix<T>, op: &BandedOperator<T>, lo: f64, hi: f64) -> SpectrumSample<T> {
    let (values, below) = window::bisect_window(op, T::of(lo), T::of(hi));
    sample(h, values, Some(SpectralWindow { lo, hi, below }))
}

/// Eigenpairs for the eigenvalues in `[lo, hi)`, vectors by inverse iteration.
///
/// Each eigenvalue is replaced by the Rayleigh quotient of its vector, which
/// removes the error that band inertia counts can carry near clusters.
pub fn eigenpairs_in_interval<T: Real>(h: &HamiltonianMatrix<T>, lo: f64, hi: f64) -> Result<EigenPairs<T>> {
    check_window(lo, hi)?;
    let op = BandedOperator::new(h);
    let mut spectrum = windowed(h, &op, lo, hi);
    let vectors = window::inverse_iteration(&op, &spectrum.eigenvalues);
    let n = h.order();
    let k = spectrum.len();
    let rayleigh: Vec<T> = (0..k).map(|j| quadratic_form(h, &vectors[j * n..(j + 1) * n])).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| rayleigh[a].partial_cmp(&rayleigh[b]).expect("finite"));
    spectrum.eigenvalues = order.iter().map(|&j| rayleigh[j]).collect();
    let mut sorted = Vec::with_capacity(n * k);
    for &j in &order {
        sorted.extend_from_slice(&vectors[j * n..(j + 1) * n]);
    }
    Ok(EigenPairs { spectrum, vectors: sorted })
}

fn quadratic_form<T: Real>(h: &HamiltonianMatrix<T>, v: &[T]) -> T {
    let mut s = T::zero();
    for x in 0..h.order() {
        let mut hv = h.diagonal()[x] * v[x];
        h.for_each_offdiag(x, |y, a| hv += a * v[y]);
        s += v[x] * hv;
    }
    s
}

/// `max |VᵀV - I|` over the stored columns.
pub fn orthonormality_defect<T: Real>(pairs: &EigenPairs<T>) -> f64 {
    let k = pairs.len();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..=i {
            let dot: f64 = pairs.vector(i).iter().zip(pairs.vector(j)).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// `max_j ‖H v_j - λ_j v_j‖₂`.
pub fn max_residual<T: Real>(h: &HamiltonianMatrix<T>, pairs: &EigenPairs<T>) -> f64 {
    let n = h.order();
    let mut worst = 0.0f64;
    for j in 0..pairs.len() {
        let v = pairs.vector(j);
        let lambda = pairs.value(j).as_f64();
        let mut sq = 0.0;
        for x in 0..n {
            let mut s = (h.diagonal()[x].as_f64() - lambda) * v[x].as_f64();
            h.for_each_offdiag(x, |y, a| s += a.as_f64() * v[y].as_f64());
            sq += s * s;
        }
        worst = worst.max(sq.sqrt());
    }
    worst
}
