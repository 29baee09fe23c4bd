//! Symmetric band storage in folded site order, with inertia counting
//! (LDLᵀ without pivoting) and band LU solves for inverse iteration.

use crate::error::{Error, Result};
use crate::lattice::HamiltonianMatrix;
use crate::scalar::Real;

/// Energies processed together by one factorization sweep.
const CHUNK: usize = 32;

/// How tiny pivots are treated during an inertia sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotPolicy {
    /// Report the energy as unreliable so the caller can perturb it.
    Strict,
    /// Replace the pivot by `-pivmin` and continue (bisection use).
    Sturm,
}

/// Lower band of `H` after relabeling sites by the folded order.
#[derive(Debug, Clone)]
pub struct BandedOperator<T> {
    n: usize,
    b: usize,
    /// `lower[p*(b+1) + k] = H[p][p-k]` in folded positions.
    lower: Vec<T>,
    /// site -> position
    position: Vec<usize>,
    frobenius: T,
    gershgorin: (T, T),
}

impl<T: Real> BandedOperator<T> {
    pub fn new(h: &HamiltonianMatrix<T>) -> Self {
        let n = h.order();
        let position = h.geometry().folded_order();
        let mut b = 0;
        h.for_each_offdiag_entry(|x, y, _| b = b.max(position[x].abs_diff(position[y])));
        let w = b + 1;
        let mut lower = vec![T::zero(); n * w];
        let mut frob = T::zero();
        let mut radius = vec![T::zero(); n];
        for x in 0..n {
            let dx = h.diagonal()[x];
            lower[position[x] * w] = dx;
            frob += dx * dx;
        }
        h.for_each_offdiag_entry(|x, y, v| {
            frob += v * v;
            radius[x] += v.abs();
            let (p, q) = (position[x], position[y]);
            if q < p {
                lower[p * w + (p - q)] = v;
            }
        });
        let mut gershgorin = (T::infinity(), T::neg_infinity());
        for (d, r) in h.diagonal().iter().zip(&radius) {
            gershgorin.0 = gershgorin.0.min(*d - *r);
            gershgorin.1 = gershgorin.1.max(*d + *r);
        }
        Self {
            n,
            b,
            lower,
            position,
            frobenius: frob.sqrt(),
            gershgorin,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius
    }

    pub fn gershgorin(&self) -> (T, T) {
        self.gershgorin
    }

    pub fn position(&self) -> &[usize] {
        &self.position
    }

    /// `H[p][q]` in folded positions, zero outside the band.
    fn at(&self, p: usize, q: usize) -> T {
        let (p, q) = if p >= q { (p, q) } else { (q, p) };
        if p - q > self.b {
            T::zero()
        } else {
            self.lower[p * (self.b + 1) + (p - q)]
        }
    }

    /// Number of negative pivots of `H - E` for each energy, i.e. the number
    /// of eigenvalues below `E`. Under [`PivotPolicy::Strict`] an energy that
    /// met a pivot smaller than `1e-12 ‖H‖_F` yields `None`.
    pub fn inertia(&self, energies: &[T], policy: PivotPolicy) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(energies.len());
        for chunk in energies.chunks(CHUNK) {
            out.extend(self.inertia_chunk(chunk, policy));
        }
        out
    }

    fn inertia_chunk(&self, energies: &[T], policy: PivotPolicy) -> Vec<Option<usize>> {
        let m = energies.len();
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        let threshold = match policy {
            PivotPolicy::Strict => T::of(1e-12) * self.frobenius,
            PivotPolicy::Sturm => T::epsilon() * self.frobenius.max(T::min_positive_value()),
        };
        // active (b+1)x(b+1) window of the partially factored matrix,
        // addressed by global index modulo b+1, one lane per energy
        let mut win = vec![T::zero(); w * w * m];
        // wrap[t] = t mod (b+1) for t < 2(b+1)
        let wrap: Vec<usize> = (0..2 * w).map(|t| t % w).collect();
        // row p of the matrix into window row p mod (b+1); `rp` is that slot
        let load = |win: &mut [T], p: usize, rp: usize| {
            let first = p.saturating_sub(b);
            let mut rq = first % w;
            for q in first..=p {
                let s = (rp * w + rq) * m;
                let v = self.lower[p * w + (p - q)];
                let lanes = &mut win[s..s + m];
                if p == q {
                    for (lane, &e) in lanes.iter_mut().zip(energies) {
                        *lane = v - e;
                    }
                } else {
                    for lane in lanes.iter_mut() {
                        *lane = v;
                    }
                }
                rq = wrap[rq + 1];
            }
        };
        for p in 0..w.min(n) {
            load(&mut win, p, p);
        }
        let mut negative = vec![0usize; m];
        let mut flagged = vec![false; m];
        let mut pivot = vec![T::zero(); m];
        let mut col = vec![T::zero(); b * m];
        let mut ri = 0;
        for i in 0..n {
            let s = (ri * w + ri) * m;
            for e in 0..m {
                let mut d = win[s + e];
                if d.abs() < threshold {
                    match policy {
                        PivotPolicy::Strict => flagged[e] = true,
                        PivotPolicy::Sturm => d = -threshold,
                    }
                }
                if d < T::zero() {
                    negative[e] += 1;
                }
                pivot[e] = d.recip();
            }
            let reach = (n - 1 - i).min(b);
            for t in 1..=reach {
                let s = (wrap[ri + t] * w + ri) * m;
                let c0 = (t - 1) * m;
                col[c0..c0 + m].copy_from_slice(&win[s..s + m]);
            }
            for tj in 1..=reach {
                let rj = wrap[ri + tj];
                let cj = &col[(tj - 1) * m..tj * m];
                for tk in 1..=tj {
                    let ck = &col[(tk - 1) * m..tk * m];
                    let s = (rj * w + wrap[ri + tk]) * m;
                    let lanes = &mut win[s..s + m];
                    for e in 0..m {
                        lanes[e] -= cj[e] * ck[e] * pivot[e];
                    }
                }
            }
            if i + w < n {
                load(&mut win, i + w, ri);
            }
            ri = wrap[ri + 1];
        }
        (0..m)
            .map(|e| if flagged[e] { None } else { Some(negative[e]) })
            .collect()
    }

    /// `#{λ <= E}` for each energy; energies hitting a tiny pivot are nudged
    /// upward by multiples of `1e-10 · max(|E|, ‖H‖_F/√n)`.
    pub fn counts_below(&self, energies: &[f64]) -> Result<Vec<usize>> {
        const RETRIES: usize = 16;
        let lanes: Vec<T> = energies.iter().map(|&e| T::of(e)).collect();
        let mut out = self.inertia(&lanes, PivotPolicy::Strict);
        let scale = self.frobenius.as_f64() / (self.n as f64).sqrt();
        for (slot, &e) in out.iter_mut().zip(energies) {
            if slot.is_some() {
                continue;
            }
            let delta = 1e-10 * e.abs().max(scale).max(f64::MIN_POSITIVE);
            for k in 1..=RETRIES {
                let shifted = T::of(e + k as f64 * delta);
                if let Some(c) = self.inertia(&[shifted], PivotPolicy::Strict)[0] {
                    *slot = Some(c);
                    break;
                }
            }
            if slot.is_none() {
                return Err(Error::InertiaRetriesExceeded { retries: RETRIES });
            }
        }
        Ok(out.into_iter().map(|c| c.expect("filled above")).collect())
    }

    /// Sturm counts `#{λ < E}` used by bisection; never fails.
    pub fn sturm_counts(&self, energies: &[T]) -> Vec<usize> {
        self.inertia(energies, PivotPolicy::Sturm)
            .into_iter()
            .map(|c| c.expect("sturm policy never flags"))
            .collect()
    }

    /// LU factorization with partial pivoting of `H - shift`.
    pub fn shifted_lu(&self, shift: T) -> BandLu<T> {
        let (n, b) = (self.n, self.b);
        let width = 3 * b + 1;
        // row r holds columns r-b ..= r+2b at offset c + b - r
        let mut rows = vec![T::zero(); n * width];
        for r in 0..n {
            for c in r.saturating_sub(b)..=(r + b).min(n - 1) {
                let mut v = self.at(r, c);
                if r == c {
                    v -= shift;
                }
                rows[r * width + c + b - r] = v;
            }
        }
        let tiny = T::epsilon() * self.frobenius.max(T::min_positive_value());
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![T::zero(); n * b.max(1)];
        let idx = |r: usize, c: usize| r * width + c + b - r;
        for k in 0..n {
            let last = (k + b).min(n - 1);
            let mut p = k;
            for r in k + 1..=last {
                if rows[idx(r, k)].abs() > rows[idx(p, k)].abs() {
                    p = r;
                }
            }
            pivots[k] = p;
            let cmax = (k + 2 * b).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    rows.swap(idx(k, c), idx(p, c));
                }
            }
            if rows[idx(k, k)].abs() < tiny {
                rows[idx(k, k)] = tiny;
            }
            let piv = rows[idx(k, k)];
            for r in k + 1..=last {
                let f = rows[idx(r, k)] / piv;
                multipliers[k * b.max(1) + (r - k - 1)] = f;
                rows[idx(r, k)] = T::zero();
                if f != T::zero() {
                    for c in k + 1..=cmax {
                        let u = rows[idx(k, c)];
                        rows[idx(r, c)] -= f * u;
                    }
                }
            }
        }
        BandLu { n, b, rows, pivots, multipliers }
    }
}

/// Band LU factors from [`BandedOperator::shifted_lu`].
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    b: usize,
    rows: Vec<T>,
    pivots: Vec<usize>,
    multipliers: Vec<T>,
}

impl<T: Real> BandLu<T> {
    /// Solves in place; `x` is indexed by folded position.
    pub fn solve(&self, x: &mut [T]) {
        let (n, b) = (self.n, self.b);
        let width = 3 * b + 1;
        let stride = b.max(1);
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + b).min(n - 1) {
                x[r] -= self.multipliers[k * stride + (r - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let row = &self.rows[k * width..(k + 1) * width];
            let mut s = x[k];
            for c in k + 1..=(k + 2 * b).min(n - 1) {
                s -= row[c + b - k] * x[c];
            }
            x[k] = s / row[b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, HoppingKernel, LatticeGeometry};

    fn ring(l: usize, w: &[f64]) -> HamiltonianMatrix<f64> {
        let k = HoppingKernel::nearest_neighbor(1, 1.0).unwrap();
        build_hamiltonian(&k, &LatticeGeometry::new(1, l).unwrap(), w).unwrap()
    }

    #[test]
    fn folded_ring_has_bandwidth_two() {
        let h = ring(10, &[0.0; 10]);
        assert_eq!(BandedOperator::new(&h).bandwidth(), 2);
    }

    #[test]
    fn lu_solve_matches_dense_product() {
        let w: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let h = ring(9, &w);
        let op = BandedOperator::new(&h);
        let lu = op.shifted_lu(0.3);
        let rhs: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let mut x = rhs.clone();
        lu.solve(&mut x);
        for p in 0..9 {
            let mut s = -0.3 * x[p];
            for q in 0..9 {
                s += op.at(p, q) * x[q];
            }
            assert!((s - rhs[p]).abs() < 1e-10, "{s} {}", rhs[p]);
        }
    }

    #[test]
    fn sturm_and_strict_agree_off_spectrum() {
        let h = ring(6, &[0.5, -1.0, 2.0, 0.0, 1.5, -0.5]);
        let op = BandedOperator::new(&h);
        let es = [-4.0, -1.1, 0.1, 0.77, 3.3, 10.0];
        let strict = op.counts_below(&es).unwrap();
        let sturm = op.sturm_counts(&es);
        assert_eq!(strict, sturm);
        assert_eq!(strict[0], 0);
        assert_eq!(strict[5], 6);
    }
}
