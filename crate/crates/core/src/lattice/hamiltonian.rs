use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{HoppingKernel, LatticeGeometry};
use crate::scalar::Real;

/// Where a realization came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Provenance {
    pub model_id: String,
    pub seed: u64,
    pub realization: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Torus: entry `(x, y)` is `Σ_β h_{x-y+Lβ}`.
    #[default]
    Periodic,
    /// Plain restriction: hoppings leaving the cube are dropped.
    Open,
}

/// Finite-volume Anderson operator `H_0 + V_ω` on a cube.
///
/// Stored structurally (diagonal plus the translation-invariant hopping
/// table) so that volumes far beyond dense reach stay cheap; [`Self::to_dense`]
/// materializes the matrix for the dense eigensolver.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix<T> {
    geometry: LatticeGeometry,
    boundary: Boundary,
    diagonal: Vec<T>,
    disorder: Vec<T>,
    /// Off-diagonal couplings keyed by displacement `x - y`: reduced mod `L`
    /// for periodic boundaries, raw kernel offsets for open ones.
    hops: Vec<(Vec<i64>, T)>,
    provenance: Provenance,
}

impl<T: Real> HamiltonianMatrix<T> {
    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn order(&self) -> usize {
        self.geometry.sites()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    pub fn disorder(&self) -> &[T] {
        &self.disorder
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Calls `f(y, H_xy)` for every nonzero off-diagonal entry of row `x`.
    pub fn for_each_offdiag(&self, x: usize, mut f: impl FnMut(usize, T)) {
        self.visit_row(&self.geometry.coords(x), &mut f);
    }

    /// Calls `f(x, y, H_xy)` for every nonzero off-diagonal entry, row by row.
    pub fn for_each_offdiag_entry(&self, mut f: impl FnMut(usize, usize, T)) {
        let side = self.geometry.side();
        let mut c = vec![0usize; self.geometry.dimension()];
        for x in 0..self.order() {
            self.visit_row(&c, &mut |y, v| f(x, y, v));
            for axis in (0..c.len()).rev() {
                c[axis] += 1;
                if c[axis] < side {
                    break;
                }
                c[axis] = 0;
            }
        }
    }

    fn visit_row(&self, cx: &[usize], f: &mut impl FnMut(usize, T)) {
        let side = self.geometry.side();
        let l = side as i64;
        'hop: for (r, v) in &self.hops {
            let mut y = 0usize;
            for (c, ri) in cx.iter().zip(r) {
                let yc = *c as i64 - ri;
                let yc = match self.boundary {
                    Boundary::Periodic => yc.rem_euclid(l),
                    Boundary::Open if (0..l).contains(&yc) => yc,
                    Boundary::Open => continue 'hop,
                };
                y = y * side + yc as usize;
            }
            f(y, *v);
        }
    }

    pub fn entry(&self, x: usize, y: usize) -> T {
        if x == y {
            return self.diagonal[x];
        }
        let mut out = T::zero();
        self.for_each_offdiag(x, |z, v| {
            if z == y {
                out = v;
            }
        });
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.order();
        let mut a = vec![T::zero(); n * n];
        for x in 0..n {
            a[x * n + x] = self.diagonal[x];
        }
        self.for_each_offdiag_entry(|x, y, v| a[x * n + y] = v);
        a
    }

    pub fn trace(&self) -> T {
        self.diagonal.iter().copied().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        let mut s: T = self.diagonal.iter().map(|&v| v * v).sum();
        self.for_each_offdiag_entry(|_, _, v| s += v * v);
        s.sqrt()
    }

    /// Gershgorin enclosure `[min_x(H_xx - R_x), max_x(H_xx + R_x)]`.
    pub fn gershgorin(&self) -> (T, T) {
        let mut radius = vec![T::zero(); self.order()];
        self.for_each_offdiag_entry(|x, _, v| radius[x] += v.abs());
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for (d, r) in self.diagonal.iter().zip(&radius) {
            lo = lo.min(*d - *r);
            hi = hi.max(*d + *r);
        }
        (lo, hi)
    }
}

/// Assembles `H_ω(Λ)` with periodic boundary conditions.
pub fn build_hamiltonian<T: Real>(
    kernel: &HoppingKernel,
    geometry: &LatticeGeometry,
    disorder: &[f64],
) -> Result<HamiltonianMatrix<T>> {
    build_hamiltonian_with(kernel, geometry, disorder, Boundary::Periodic)
}

pub fn build_hamiltonian_with<T: Real>(
    kernel: &HoppingKernel,
    geometry: &LatticeGeometry,
    disorder: &[f64],
    boundary: Boundary,
) -> Result<HamiltonianMatrix<T>> {
    if kernel.dimension() != geometry.dimension() {
        return Err(Error::DimensionMismatch {
            expected: geometry.dimension(),
            got: kernel.dimension(),
        });
    }
    if disorder.len() != geometry.sites() {
        return Err(Error::DimensionMismatch {
            expected: geometry.sites(),
            got: disorder.len(),
        });
    }
    if geometry.side() < 2 {
        return Err(Error::InvalidGeometry("side length must be at least 2".into()));
    }
    let l = geometry.side() as i64;
    let (h0, hops) = match boundary {
        Boundary::Periodic => {
            let mut wrapped: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for (k, h) in kernel.coefficients() {
                let r: Vec<i64> = k.iter().map(|c| c.rem_euclid(l)).collect();
                *wrapped.entry(r).or_insert(0.0) += h;
            }
            let zero = vec![0; geometry.dimension()];
            let h0 = wrapped.remove(&zero).unwrap_or(0.0);
            // r and -r receive the same summands in a different order; copy
            // the value of the smaller key so the matrix is exactly symmetric.
            let keys: Vec<Vec<i64>> = wrapped.keys().cloned().collect();
            for r in keys {
                let mirror: Vec<i64> = r.iter().map(|c| (-c).rem_euclid(l)).collect();
                if mirror < r {
                    let v = wrapped[&mirror];
                    wrapped.insert(r, v);
                }
            }
            let hops = wrapped
                .into_iter()
                .filter(|(_, v)| *v != 0.0)
                .map(|(r, v)| (r, T::of(v)))
                .collect();
            (h0, hops)
        }
        Boundary::Open => {
            let zero = vec![0; geometry.dimension()];
            let h0 = kernel.coefficient(&zero);
            let hops = kernel
                .coefficients()
                .filter(|(k, _)| k.iter().any(|&c| c != 0))
                .filter(|(k, _)| k.iter().all(|c| c.abs() < l))
                .map(|(k, v)| (k.to_vec(), T::of(v)))
                .collect();
            (h0, hops)
        }
    };
    let disorder: Vec<T> = disorder.iter().map(|&w| T::of(w)).collect();
    let h0 = T::of(h0);
    Ok(HamiltonianMatrix {
        geometry: geometry.clone(),
        boundary,
        diagonal: disorder.iter().map(|&w| h0 + w).collect(),
        disorder,
        hops,
        provenance: Provenance::default(),
    })
}
