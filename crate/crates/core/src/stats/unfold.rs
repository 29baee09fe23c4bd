use crate::eigen::SpectrumSample;
use crate::error::{Error, Result};
use crate::ids::IdsTable;

/// Eigenvalues of one realization mapped to `ξ = |Λ|(N(E) - N(E₀))` and
/// restricted to `[-s, s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedSample {
    pub e0: f64,
    pub half_width: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub realization: u64,
}

/// Unfolded samples sharing anchor and window, one per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProcessBatch {
    pub e0: f64,
    pub half_width: f64,
    pub samples: Vec<UnfoldedSample>,
}

fn check_independent(sample: &SpectrumSample<f64>, table: &IdsTable) -> Result<()> {
    let p = &sample.provenance;
    if p.model_id != table.model_id() {
        return Err(Error::ModelMismatch { table: table.model_id().into(), sample: p.model_id.clone() });
    }
    if table.provenance().contains(p.seed, p.realization) {
        return Err(Error::ProvenanceOverlap { seed: p.seed, realization: p.realization });
    }
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(())
}

fn check_support(table: &IdsTable, e: f64) -> Result<()> {
    let k = table.knots();
    let (lo, hi) = (k[0], k[k.len() - 1]);
    if !(lo..=hi).contains(&e) {
        return Err(Error::OutsideSupport { energy: e, lo, hi });
    }
    Ok(())
}

/// A windowed sample must contain every eigenvalue that can land in the
/// requested unfolded range. A side with no eigenvalue beyond the window
/// is covered whatever its unfolded position.
fn check_coverage(sample: &SpectrumSample<f64>, table: &IdsTable, from: f64, to: f64, volume: f64) -> Result<()> {
    if let Some(w) = sample.window {
        let a = volume * table.evaluate(w.lo)?;
        let b = volume * table.evaluate(w.hi)?;
        let nothing_below = w.below == 0;
        let nothing_above = w.below + sample.len() == sample.sites();
        if (a > from && !nothing_below) || (b < to && !nothing_above) {
            return Err(Error::WindowNotCovered { lo: w.lo, hi: w.hi, req_lo: from / volume, req_hi: to / volume });
        }
    }
    Ok(())
}

pub fn unfold(sample: &SpectrumSample<f64>, table: &IdsTable, e0: f64, half_width: f64) -> Result<UnfoldedSample> {
    if !(half_width > 0.0) {
        return Err(Error::Precondition("window half-width must be positive".into()));
    }
    check_independent(sample, table)?;
    check_support(table, e0)?;
    let volume = sample.sites() as f64;
    let n0 = table.evaluate(e0)?;
    check_coverage(sample, table, volume * n0 - half_width, volume * n0 + half_width, volume)?;
    let mut values = Vec::new();
    for &e in &sample.eigenvalues {
        let xi = volume * (table.evaluate(e)? - n0);
        if xi.abs() <= half_width {
            values.push(xi);
        }
    }
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    Ok(UnfoldedSample { e0, half_width, values, seed: sample.provenance.seed, realization: sample.provenance.realization })
}

pub fn collect_point_process(samples: Vec<UnfoldedSample>) -> Result<PointProcessBatch> {
    let first = samples.first().ok_or(Error::EmptyBatch)?;
    let (e0, half_width) = (first.e0, first.half_width);
    if samples.iter().any(|s| s.e0 != e0 || s.half_width != half_width) {
        return Err(Error::BatchMismatch("samples use different anchors or windows".into()));
    }
    let mut ids: Vec<(u64, u64)> = samples.iter().map(|s| (s.seed, s.realization)).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::ProvenanceOverlap { seed: w[0].0, realization: w[0].1 });
    }
    Ok(PointProcessBatch { e0, half_width, samples })
}

impl PointProcessBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Concatenation of two batches with the same window.
    pub fn merge(mut self, other: PointProcessBatch) -> Result<Self> {
        self.samples.extend(other.samples);
        collect_point_process(self.samples)
    }

    /// Atom counts in `[a, b)` per realization.
    pub fn counts_in(&self, a: f64, b: f64) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| s.values.iter().filter(|&&x| x >= a && x < b).count())
            .collect()
    }

    /// Atoms per realization per unit length over the whole window.
    pub fn intensity(&self) -> f64 {
        let atoms: usize = self.samples.iter().map(|s| s.values.len()).sum();
        atoms as f64 / (self.samples.len() as f64 * 2.0 * self.half_width)
    }
}

/// Atoms `N(J)|Λ|(N_J(E_n) - t)` for eigenvalues `E_n ∈ J = [a, b]`, where
/// `N_J` is the IDS renormalized to `J`.
pub fn rescaled_uniform_process(sample: &SpectrumSample<f64>, table: &IdsTable, a: f64, b: f64, t: f64) -> Result<Vec<f64>> {
    if a > b {
        return Err(Error::InvertedInterval(a, b));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!("t = {t} must lie in [0, 1]")));
    }
    check_independent(sample, table)?;
    let (na, nb) = (table.evaluate(a)?, table.evaluate(b)?);
    let mass = nb - na;
    if mass <= 0.0 {
        return Err(Error::ZeroMass(a, b));
    }
    let volume = sample.sites() as f64;
    if let Some(w) = sample.window {
        if w.lo > a || w.hi < b {
            return Err(Error::WindowNotCovered { lo: w.lo, hi: w.hi, req_lo: a, req_hi: b });
        }
    }
    sample
        .eigenvalues
        .iter()
        .filter(|&&e| e >= a && e <= b)
        .map(|&e| Ok(mass * volume * ((table.evaluate(e)? - na) / mass - t)))
        .collect()
}
