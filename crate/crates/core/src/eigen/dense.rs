//! Householder tridiagonalization and implicit-shift QL on dense storage.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sweeps allowed per eigenvalue before giving up.
pub const MAX_SWEEPS: usize = 50;

/// Reduces the symmetric row-major `a` (order `n`) to tridiagonal form.
///
/// Returns `(d, e)` with `e[i]` coupling `i-1` and `i` (`e[0] = 0`). With
/// `vectors` set, `a` is overwritten by the orthogonal reduction matrix `Q`
/// (row-major, `A = Q T Qᵀ`); otherwise `a` is left in an unspecified state.
pub fn tridiagonalize<T: Real>(a: &mut [T], n: usize, vectors: bool) -> (Vec<T>, Vec<T>) {
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    if n == 0 {
        return (d, e);
    }
    let mut u = vec![T::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let scale: T = a[i * n..i * n + i].iter().map(|v| v.abs()).sum();
            if scale == T::zero() {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                u[..=l].copy_from_slice(&a[i * n..i * n + i]);
                // p = A u over the leading (l+1) block, lower triangle only
                for v in e[..=l].iter_mut() {
                    *v = T::zero();
                }
                for j in 0..=l {
                    if vectors {
                        a[j * n + i] = u[j] / h;
                    }
                    let row = &a[j * n..j * n + j + 1];
                    let uj = u[j];
                    let mut g = row[j] * uj;
                    for k in 0..j {
                        g += row[k] * u[k];
                        e[k] += row[k] * uj;
                    }
                    e[j] += g;
                }
                let mut f = T::zero();
                for j in 0..=l {
                    e[j] /= h;
                    f += e[j] * u[j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    e[j] -= hh * u[j];
                }
                for j in 0..=l {
                    let (fj, gj) = (u[j], e[j]);
                    let row = &mut a[j * n..j * n + j + 1];
                    for k in 0..=j {
                        row[k] -= fj * e[k] + gj * u[k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    e[0] = T::zero();
    if !vectors {
        for i in 0..n {
            d[i] = a[i * n + i];
        }
        return (d, e);
    }
    d[0] = T::zero();
    let mut g = vec![T::zero(); n];
    for i in 0..n {
        if d[i] != T::zero() {
            // g_j = Σ_k a[i][k] a[k][j], then a[k][j] -= g_j a[k][i]
            for v in g[..i].iter_mut() {
                *v = T::zero();
            }
            for k in 0..i {
                let s = a[i * n + k];
                let row = &a[k * n..k * n + i];
                for j in 0..i {
                    g[j] += s * row[j];
                }
            }
            for k in 0..i {
                let s = a[k * n + i];
                let row = &mut a[k * n..k * n + i];
                for j in 0..i {
                    row[j] -= g[j] * s;
                }
            }
        }
        d[i] = a[i * n + i];
        a[i * n + i] = T::one();
        for j in 0..i {
            a[j * n + i] = T::zero();
            a[i * n + j] = T::zero();
        }
    }
    (d, e)
}

/// Implicit QL on the tridiagonal `(d, e)` from [`tridiagonalize`].
///
/// `rows`, when given, holds `n` vectors of length `n` stored row after row;
/// each plane rotation acting on columns `i, i+1` of the eigenvector matrix
/// is applied to rows `i, i+1` here, so pass `Qᵀ` to get eigenvectors as
/// rows. Eigenvalues are left unsorted in `d`.
pub fn tridiagonal_ql<T: Real>(
    d: &mut [T],
    e: &mut [T],
    mut rows: Option<&mut [T]>,
) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::of(2.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence { iterations: MAX_SWEEPS });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = rows.as_deref_mut() {
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// All eigenvalues of the row-major symmetric `a`, ascending.
pub fn symmetric_eigenvalues<T: Real>(mut a: Vec<T>, n: usize) -> Result<Vec<T>> {
    let (mut d, mut e) = tridiagonalize(&mut a, n, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(d)
}

/// Eigenvalues ascending and matching unit eigenvectors, column-major.
pub fn symmetric_eigenpairs<T: Real>(mut a: Vec<T>, n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (mut d, mut e) = tridiagonalize(&mut a, n, true);
    // transpose Q so rotations touch contiguous rows
    for i in 0..n {
        for j in 0..i {
            a.swap(i * n + j, j * n + i);
        }
    }
    tridiagonal_ql(&mut d, &mut e, Some(&mut a))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).expect("finite eigenvalues"));
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &order {
        vectors.extend_from_slice(&a[j * n..(j + 1) * n]);
    }
    Ok((values, vectors))
}
