//! Monte Carlo checks of Wegner, Minami and higher-order moment bounds.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use crate::eigen::{counts_below, SpectrumSample};
use crate::error::{Error, Result};
use crate::ids::{least_squares_fit, IdsTable, SeedRanges};
use crate::lattice::{LatticeGeometry, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    ClassicalWegner,
    EnhancedWegner,
    ClassicalMinami,
    EnhancedMinami,
    HighOrder(usize),
    Wcontrol,
}

impl Quantity {
    pub fn tag(&self) -> String {
        match self {
            Quantity::ClassicalWegner => "W".into(),
            Quantity::EnhancedWegner => "W_enhanced".into(),
            Quantity::ClassicalMinami => "M".into(),
            Quantity::EnhancedMinami => "M_enhanced".into(),
            Quantity::HighOrder(n) => format!("HOM({n})"),
            Quantity::Wcontrol => "Wcontrol".into(),
        }
    }
}

/// Estimate of a moment quantity against its upper bound; passes when
/// `estimate + 2·SE <= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub quantity: Quantity,
    pub estimate: f64,
    pub standard_error: f64,
    pub bound: f64,
    pub passed: bool,
    pub realizations: usize,
    pub provenance: SeedRanges,
}

impl MomentReport {
    fn new(quantity: Quantity, values: &[f64], bound: f64, provenance: &SeedRanges) -> Self {
        let (estimate, standard_error) = mean_and_se(values);
        Self {
            quantity,
            estimate,
            standard_error,
            bound,
            passed: estimate + 2.0 * standard_error <= bound,
            realizations: values.len(),
            provenance: provenance.clone(),
        }
    }

    /// `(estimate - bound) / SE`: how far the estimate sits from saturating
    /// the bound, in standard errors.
    pub fn saturation_z(&self) -> f64 {
        (self.estimate - self.bound) / self.standard_error.max(f64::MIN_POSITIVE)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "quantity = {}", self.quantity.tag()).unwrap();
        writeln!(out, "estimate = {}", self.estimate).unwrap();
        writeln!(out, "standard_error = {}", self.standard_error).unwrap();
        writeln!(out, "bound = {}", self.bound).unwrap();
        writeln!(out, "passed = {}", self.passed).unwrap();
        writeln!(out, "realizations = {}", self.realizations).unwrap();
        let ranges: Vec<String> = self.provenance.ranges().iter().map(|(s, a, b)| format!("{s}:{a}-{b}")).collect();
        writeln!(out, "provenance = {}", ranges.join(",")).unwrap();
        out
    }
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Constants of the classical bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// Wegner constant, default `‖g‖_∞`.
    pub wegner: f64,
    /// Minami constant, default `π²‖g‖²_∞`.
    pub minami: f64,
    /// `‖ρ‖_∞` in the high-order bound, default `‖g‖_∞`.
    pub density: f64,
    /// High-order checks need `N(I_n)|Λ|` at least this large.
    pub hom_mass_floor: f64,
}

impl BoundConstants {
    pub fn from_density(g: f64) -> Self {
        Self { wegner: g, minami: std::f64::consts::PI.powi(2) * g * g, density: g, hom_mass_floor: 1.0 }
    }
}

/// Per-realization eigenvalue counts in a set of intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CountBatch {
    /// `counts[r][k]`: eigenvalues of realization `r` in interval `k`.
    pub counts: Vec<Vec<u64>>,
    pub volume: usize,
    pub provenance: SeedRanges,
}

impl CountBatch {
    /// Counts in `[a, b)` for each interval from spectrum samples, which
    /// must be independent of `table` and cover the intervals.
    pub fn from_samples(samples: &[SpectrumSample<f64>], intervals: &[(f64, f64)], table: &IdsTable) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyBatch)?;
        let volume = first.sites();
        let mut provenance = SeedRanges::new();
        let mut counts = Vec::with_capacity(samples.len());
        for s in samples {
            let p = &s.provenance;
            if p.model_id != table.model_id() {
                return Err(Error::ModelMismatch { table: table.model_id().into(), sample: p.model_id.clone() });
            }
            if table.provenance().contains(p.seed, p.realization) {
                return Err(Error::ProvenanceOverlap { seed: p.seed, realization: p.realization });
            }
            if s.sites() != volume {
                return Err(Error::BatchMismatch("samples of different volumes".into()));
            }
            let mut row = Vec::with_capacity(intervals.len());
            for &(a, b) in intervals {
                if a > b {
                    return Err(Error::InvertedInterval(a, b));
                }
                if let Some(w) = s.window {
                    if w.lo > a || w.hi < b {
                        return Err(Error::WindowNotCovered { lo: w.lo, hi: w.hi, req_lo: a, req_hi: b });
                    }
                }
                row.push(s.eigenvalues.iter().filter(|&&e| e >= a && e < b).count() as u64);
            }
            provenance.insert(p.seed, p.realization..p.realization + 1);
            counts.push(row);
        }
        Ok(Self { counts, volume, provenance })
    }

    /// Counts from inertia, no diagonalization: `#{a < λ <= b}` per interval.
    pub fn from_inertia(
        model: &Model,
        geometry: &LatticeGeometry,
        seed: u64,
        realizations: Range<u64>,
        intervals: &[(f64, f64)],
    ) -> Result<Self> {
        let energies: Vec<f64> = intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
        let rows: Vec<Vec<u64>> = realizations
            .clone()
            .into_par_iter()
            .map(|r| {
                let c = counts_below(&model.realize::<f64>(geometry, seed, r)?, &energies)?;
                Ok(c.chunks(2).map(|p| (p[1] - p[0]) as u64).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { counts: rows, volume: geometry.sites(), provenance: SeedRanges::single(seed, realizations) })
    }

    pub fn column(&self, k: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Classical and enhanced Wegner reports plus the finite-volume discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct WegnerReport {
    pub classical: MomentReport,
    pub enhanced: MomentReport,
    /// `N(I)|Λ|` from the table.
    pub expected: f64,
    /// `|mean count - N(I)|Λ||`.
    pub discrepancy: f64,
    /// Combined MC and table standard error of the discrepancy.
    pub discrepancy_se: f64,
    /// `mean count / (N(I)|Λ|)`.
    pub ratio: f64,
}

fn check_table(batch: &CountBatch, table: &IdsTable) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some((seed, realization)) = table.provenance().first_overlap(&batch.provenance) {
        return Err(Error::ProvenanceOverlap { seed, realization });
    }
    Ok(())
}

/// Wegner check for interval `k` of the batch, which is `(a, b)`.
pub fn wegner_estimate(batch: &CountBatch, k: usize, interval: (f64, f64), table: &IdsTable, c: &BoundConstants) -> Result<WegnerReport> {
    check_table(batch, table)?;
    let (a, b) = interval;
    let volume = batch.volume as f64;
    let values: Vec<f64> = batch.column(k).into_iter().map(|c| c as f64).collect();
    let mass = table.interval_mass(a, b)?;
    let expected = mass * volume;
    let classical = MomentReport::new(Quantity::ClassicalWegner, &values, c.wegner * (b - a) * volume, &batch.provenance);
    let enhanced = MomentReport::new(Quantity::EnhancedWegner, &values, 2.0 * expected, &batch.provenance);
    let table_se = volume * table.mass_standard_error(a, b)?;
    let discrepancy = (enhanced.estimate - expected).abs();
    let discrepancy_se = (enhanced.standard_error.powi(2) + table_se.powi(2)).sqrt();
    let ratio = if expected > 0.0 { enhanced.estimate / expected } else { f64::NAN };
    Ok(WegnerReport { classical, enhanced, expected, discrepancy, discrepancy_se, ratio })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinamiReport {
    pub classical: MomentReport,
    pub enhanced: MomentReport,
}

/// `E[k(k-1)]` for the count `k` in interval `k_index`.
pub fn minami_estimate(batch: &CountBatch, k_index: usize, interval: (f64, f64), table: &IdsTable, c: &BoundConstants) -> Result<MinamiReport> {
    check_table(batch, table)?;
    let (a, b) = interval;
    let volume = batch.volume as f64;
    let values: Vec<f64> = batch.column(k_index).into_iter().map(|k| (k as f64) * (k as f64 - 1.0)).collect();
    let len = b - a;
    let mass = table.interval_mass(a, b)?;
    Ok(MinamiReport {
        classical: MomentReport::new(Quantity::ClassicalMinami, &values, c.minami * (len * volume).powi(2), &batch.provenance),
        enhanced: MomentReport::new(Quantity::EnhancedMinami, &values, 2.0 * mass * len * volume * volume, &batch.provenance),
    })
}

/// `E[∏_k (count(I_k) - k + 1)]` over nested intervals `I_1 ⊆ … ⊆ I_n`,
/// given as batch columns `columns[k]` with energies `intervals[k]`.
pub fn high_order_moment(
    batch: &CountBatch,
    columns: &[usize],
    intervals: &[(f64, f64)],
    table: &IdsTable,
    c: &BoundConstants,
) -> Result<MomentReport> {
    check_table(batch, table)?;
    let n = intervals.len();
    if n < 2 || columns.len() != n {
        return Err(Error::Precondition("need at least two intervals, one batch column each".into()));
    }
    if intervals.windows(2).any(|w| !(w[1].0 <= w[0].0 && w[0].1 <= w[1].1)) {
        return Err(Error::NotNested);
    }
    let volume = batch.volume as f64;
    let (an, bn) = intervals[n - 1];
    let top_mass = table.interval_mass(an, bn)? * volume;
    if top_mass < c.hom_mass_floor {
        return Err(Error::InsufficientMass { requested: c.hom_mass_floor, available: top_mass });
    }
    let values: Vec<f64> = batch
        .counts
        .iter()
        .map(|row| (0..n).map(|k| row[columns[k]] as f64 - k as f64).product())
        .collect();
    let prefactor: f64 = intervals[..n - 1].iter().map(|(a, b)| c.density * (b - a) * volume).product();
    Ok(MomentReport::new(Quantity::HighOrder(n), &values, 2.0 * prefactor * top_mass, &batch.provenance))
}

/// One volume of [`wcontrol_decay`].
#[derive(Debug, Clone, PartialEq)]
pub struct WcontrolRow {
    pub side: usize,
    pub mean_count: f64,
    pub expected: f64,
    pub discrepancy: f64,
    pub standard_error: f64,
}

impl WcontrolRow {
    /// Discrepancy in units of its standard error.
    pub fn z(&self) -> f64 {
        self.discrepancy / self.standard_error.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcontrolReport {
    pub rows: Vec<WcontrolRow>,
    /// Slope of `log discrepancy` against `log L` over resolvable rows.
    pub decay_slope: Option<f64>,
    /// Resolvable discrepancies (above 2·SE) do not grow with `L`.
    pub non_growing: bool,
}

impl WcontrolReport {
    /// Every discrepancy within `k` standard errors of zero.
    pub fn all_within(&self, k: f64) -> bool {
        self.rows.iter().all(|r| r.discrepancy <= k * r.standard_error)
    }
}

/// Discrepancy table from per-volume counts `(L, counts)`.
pub fn wcontrol_from_counts(rows: &[(usize, usize, Vec<u64>)], interval: (f64, f64), table: &IdsTable) -> Result<WcontrolReport> {
    if rows.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: rows.len() });
    }
    let (a, b) = interval;
    let mass = table.interval_mass(a, b)?;
    let mass_se = table.mass_standard_error(a, b)?;
    let mut out = Vec::with_capacity(rows.len());
    for (side, volume, counts) in rows {
        if counts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let (mean, se) = mean_and_se(&values);
        let v = *volume as f64;
        out.push(WcontrolRow {
            side: *side,
            mean_count: mean,
            expected: mass * v,
            discrepancy: (mean - mass * v).abs(),
            standard_error: (se * se + (mass_se * v).powi(2)).sqrt(),
        });
    }
    out.sort_by_key(|r| r.side);
    let resolvable: Vec<&WcontrolRow> = out.iter().filter(|r| r.discrepancy > 2.0 * r.standard_error).collect();
    let non_growing = resolvable.windows(2).all(|w| w[1].discrepancy <= w[0].discrepancy + 2.0 * w[1].standard_error);
    let decay_slope = (resolvable.len() >= 2).then(|| {
        let pts: Vec<(f64, f64)> = resolvable.iter().map(|r| ((r.side as f64).ln(), r.discrepancy.ln())).collect();
        least_squares_fit(&pts).0
    });
    Ok(WcontrolReport { rows: out, decay_slope, non_growing })
}

/// Discrepancy `|E tr 1_I(H_L) - N(I) L^d|` across side lengths.
pub fn wcontrol_decay(
    model: &Model,
    interval: (f64, f64),
    sides: &[usize],
    seed: u64,
    realizations: Range<u64>,
    table: &IdsTable,
) -> Result<WcontrolReport> {
    if sides.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: sides.len() });
    }
    if table.model_id() != model.id() {
        return Err(Error::ModelMismatch { table: table.model_id().into(), sample: model.id() });
    }
    if let Some((s, r)) = table.provenance().first_overlap(&SeedRanges::single(seed, realizations.clone())) {
        return Err(Error::ProvenanceOverlap { seed: s, realization: r });
    }
    let mut rows = Vec::new();
    for &side in sides {
        let g = LatticeGeometry::new(model.dimension(), side)?;
        let batch = CountBatch::from_inertia(model, &g, seed, realizations.clone(), &[interval])?;
        rows.push((side, g.sites(), batch.column(0)));
    }
    wcontrol_from_counts(&rows, interval, table)
}
