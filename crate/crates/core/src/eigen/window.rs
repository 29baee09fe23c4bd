//! Eigenvalues in an energy window by bisection on Sturm counts, and
//! eigenvectors for them by inverse iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::band::BandedOperator;
use crate::scalar::Real;

/// Eigenvalues of `op` in `[lo, hi)` (ascending) and the count below `lo`.
pub fn bisect_window<T: Real>(op: &BandedOperator<T>, lo: T, hi: T) -> (Vec<T>, usize) {
    let ends = op.sturm_counts(&[lo, hi]);
    let (below, upto) = (ends[0], ends[1].max(ends[0]));
    let (g_lo, g_hi) = op.gershgorin();
    let spread = (g_hi - g_lo).abs().max(T::min_positive_value());
    let eps = T::epsilon();
    let two = T::of(2.0);
    // (a, b, count below a, count below b), kept in left-to-right order
    let mut active = vec![(lo, hi, below, upto)];
    let mut done = Vec::new();
    while !active.is_empty() {
        let mids: Vec<T> = active.iter().map(|&(a, b, _, _)| (a + b) / two).collect();
        let counts = op.sturm_counts(&mids);
        let mut next = Vec::with_capacity(active.len() * 2);
        for (k, &(a, b, ca, cb)) in active.iter().enumerate() {
            let m = mids[k];
            let cm = counts[k].clamp(ca, cb);
            for (x, y, cx, cy) in [(a, m, ca, cm), (m, b, cm, cb)] {
                if cy == cx {
                    continue;
                }
                let tol = two * eps * (x.abs() + y.abs()) + eps * spread;
                if y - x <= tol || m == a || m == b {
                    done.push(((x + y) / two, cy - cx));
                } else {
                    next.push((x, y, cx, cy));
                }
            }
        }
        active = next;
    }
    done.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
    let mut values = Vec::with_capacity(upto - below);
    for (v, mult) in done {
        values.extend(std::iter::repeat_n(v, mult));
    }
    (values, below)
}

/// Unit eigenvectors (site order, column-major) for the given eigenvalues.
pub fn inverse_iteration<T: Real>(op: &BandedOperator<T>, values: &[T]) -> Vec<T> {
    const SWEEPS: usize = 3;
    let n = op.order();
    let cluster_gap = T::of(1e-3) * op.frobenius_norm();
    let mut folded: Vec<T> = Vec::with_capacity(n * values.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = vec![T::zero(); n];
    for (j, &lambda) in values.iter().enumerate() {
        let lu = op.shifted_lu(lambda);
        for v in x.iter_mut() {
            *v = T::of(rng.random::<f64>() - 0.5);
        }
        let first = (0..j)
            .rev()
            .take_while(|&i| lambda - values[i] < cluster_gap)
            .last()
            .unwrap_or(j);
        for _ in 0..SWEEPS {
            lu.solve(&mut x);
            for i in first..j {
                let q = &folded[i * n..(i + 1) * n];
                let dot: T = q.iter().zip(&x).map(|(a, b)| *a * *b).sum();
                for (xv, qv) in x.iter_mut().zip(q) {
                    *xv -= dot * *qv;
                }
            }
            normalize(&mut x);
        }
        folded.extend_from_slice(&x);
    }
    let pos = op.position();
    let mut out = vec![T::zero(); n * values.len()];
    for j in 0..values.len() {
        for (site, &p) in pos.iter().enumerate() {
            out[j * n + site] = folded[j * n + p];
        }
    }
    out
}

fn normalize<T: Real>(x: &mut [T]) {
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        x[0] = T::one();
        return;
    }
    for v in x.iter_mut() {
        *v /= scale;
    }
    let norm = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
    for v in x.iter_mut() {
        *v /= norm;
    }
}
