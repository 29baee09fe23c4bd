use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Real symmetric convolution kernel `h_k`, finitely supported.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingKernel {
    dimension: usize,
    coefficients: BTreeMap<Vec<i64>, f64>,
    radius: usize,
}

impl HoppingKernel {
    /// Validating constructor: offsets of length `dimension`, `h_{-k} = h_k`
    /// exactly, and at least one nonzero coefficient off the origin.
    pub fn new<I>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        let kernel = Self::from_entries(dimension, entries)?;
        if !kernel.coefficients.keys().any(|k| k.iter().any(|&c| c != 0)) {
            return Err(Error::InvalidKernel(
                "no nonzero coefficient at a nonzero offset".into(),
            ));
        }
        Ok(kernel)
    }

    /// Multiplication-operator reference kernel: only `h_0` (possibly zero).
    ///
    /// Skips the nontriviality requirement of [`HoppingKernel::new`]; used as
    /// the analytically solvable baseline where the IDS is the disorder CDF.
    pub fn on_site(dimension: usize, h0: f64) -> Result<Self> {
        Self::from_entries(dimension, [(vec![0; dimension], h0)])
    }

    /// `h_{±e_a} = t` along every axis.
    pub fn nearest_neighbor(dimension: usize, t: f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(2 * dimension);
        for axis in 0..dimension {
            for s in [-1, 1] {
                let mut k = vec![0; dimension];
                k[axis] = s;
                entries.push((k, t));
            }
        }
        Self::new(dimension, entries)
    }

    fn from_entries<I>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        if dimension == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        let mut coefficients = BTreeMap::new();
        for (k, h) in entries {
            if k.len() != dimension {
                return Err(Error::InvalidKernel(format!(
                    "offset {k:?} has {} components, expected {dimension}",
                    k.len()
                )));
            }
            if !h.is_finite() {
                return Err(Error::InvalidKernel(format!("coefficient at {k:?} is not finite")));
            }
            if coefficients.insert(k.clone(), h).is_some() {
                return Err(Error::InvalidKernel(format!("offset {k:?} given twice")));
            }
        }
        coefficients.retain(|_, h| *h != 0.0);
        for (k, h) in &coefficients {
            let mirror: Vec<i64> = k.iter().map(|c| -c).collect();
            if coefficients.get(&mirror) != Some(h) {
                return Err(Error::InvalidKernel(format!(
                    "h at {k:?} is {h} but its mirror is {:?}",
                    coefficients.get(&mirror)
                )));
            }
        }
        let radius = coefficients
            .keys()
            .flat_map(|k| k.iter().map(|c| c.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        Ok(Self { dimension, coefficients, radius })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support_radius(&self) -> usize {
        self.radius
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.coefficients.iter().map(|(k, &h)| (k.as_slice(), h))
    }

    pub fn coefficient(&self, offset: &[i64]) -> f64 {
        self.coefficients.get(offset).copied().unwrap_or(0.0)
    }

    /// Fourier symbol `h(θ) = Σ_k h_k cos(k·θ)`.
    pub fn symbol(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dimension);
        self.coefficients
            .iter()
            .map(|(k, h)| {
                let phase: f64 = k.iter().zip(theta).map(|(&ki, t)| ki as f64 * t).sum();
                h * phase.cos()
            })
            .sum()
    }

    /// `(min_θ h(θ), max_θ h(θ))`: dense grid search, then compass refinement.
    pub fn symbol_range(&self) -> (f64, f64) {
        let d = self.dimension;
        let per_axis = ((200_000f64).powf(1.0 / d as f64) as usize).clamp(8, 4096);
        let step = 2.0 * PI / per_axis as f64;
        let mut best_lo = (f64::INFINITY, vec![0.0; d]);
        let mut best_hi = (f64::NEG_INFINITY, vec![0.0; d]);
        let mut idx = vec![0usize; d];
        loop {
            let theta: Vec<f64> = idx.iter().map(|&i| -PI + i as f64 * step).collect();
            let v = self.symbol(&theta);
            if v < best_lo.0 {
                best_lo = (v, theta.clone());
            }
            if v > best_hi.0 {
                best_hi = (v, theta);
            }
            let mut axis = 0;
            while axis < d {
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis == d {
                break;
            }
        }
        let lo = self.compass(best_lo.1, step, 1.0);
        let hi = self.compass(best_hi.1, step, -1.0);
        (lo, hi)
    }

    /// Pattern search minimizing `sign * h`, returns `h` at the optimum.
    fn compass(&self, mut theta: Vec<f64>, mut step: f64, sign: f64) -> f64 {
        let mut value = sign * self.symbol(&theta);
        while step > 1e-13 {
            let mut improved = false;
            for axis in 0..theta.len() {
                for dir in [-1.0, 1.0] {
                    let mut trial = theta.clone();
                    trial[axis] += dir * step;
                    let v = sign * self.symbol(&trial);
                    if v < value {
                        value = v;
                        theta = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        sign * value
    }

    /// Canonical text form, used for model identifiers.
    pub fn describe(&self) -> String {
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .map(|(k, h)| format!("{k:?}:{h:e}"))
            .collect();
        format!("d={};{}", self.dimension, terms.join(","))
    }
}
