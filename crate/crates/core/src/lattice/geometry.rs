use crate::error::{Error, Result};

/// Periodic cube `{0, …, L-1}^d` with lexicographic site indexing
/// (first coordinate most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeGeometry {
    dimension: usize,
    side: usize,
    sites: usize,
}

impl LatticeGeometry {
    pub fn new(dimension: usize, side: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidGeometry("dimension must be positive".into()));
        }
        if side == 0 {
            return Err(Error::InvalidGeometry("side length must be positive".into()));
        }
        let sites = (0..dimension)
            .try_fold(1usize, |acc, _| acc.checked_mul(side))
            .ok_or_else(|| Error::InvalidGeometry(format!("{side}^{dimension} sites overflow")))?;
        Ok(Self { dimension, side, sites })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        debug_assert!(index < self.sites);
        let mut c = vec![0; self.dimension];
        let mut rest = index;
        for axis in (0..self.dimension).rev() {
            c[axis] = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dimension);
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    /// Site reached from `index` by the lattice vector `shift`, wrapped periodically.
    pub fn translate(&self, index: usize, shift: &[i64]) -> usize {
        let l = self.side as i64;
        let mut c = self.coords(index);
        for (ci, s) in c.iter_mut().zip(shift) {
            *ci = (*ci as i64 + s).rem_euclid(l) as usize;
        }
        self.index(&c)
    }

    /// Minimal-image displacement `x - y` per axis, components in `(-L/2, L/2]`.
    pub fn displacement(&self, x: usize, y: usize) -> Vec<i64> {
        let l = self.side as i64;
        self.coords(x)
            .iter()
            .zip(self.coords(y))
            .map(|(&a, b)| {
                let mut r = (a as i64 - b as i64).rem_euclid(l);
                if 2 * r > l {
                    r -= l;
                }
                r
            })
            .collect()
    }

    /// Periodic sup-norm distance.
    pub fn distance(&self, x: usize, y: usize) -> usize {
        self.displacement(x, y)
            .into_iter()
            .map(|r| r.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Bandwidth-reducing relabeling `site -> position`.
    ///
    /// Each coordinate is folded as `0, L-1, 1, L-2, …` so that periodic
    /// neighbours at distance `r` sit at most `2r` apart along that axis.
    pub fn folded_order(&self) -> Vec<usize> {
        let fold: Vec<usize> = (0..self.side)
            .map(|c| {
                let half = self.side.div_ceil(2);
                if c < half {
                    2 * c
                } else {
                    2 * (self.side - 1 - c) + 1
                }
            })
            .collect();
        (0..self.sites)
            .map(|x| {
                let (mut rest, mut pos, mut weight) = (x, 0, 1);
                for _ in 0..self.dimension {
                    pos += fold[rest % self.side] * weight;
                    rest /= self.side;
                    weight *= self.side;
                }
                pos
            })
            .collect()
    }
}
