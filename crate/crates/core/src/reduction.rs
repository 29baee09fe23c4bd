//! Box decomposition, localization centers and local-versus-global
//! eigenvalue matching.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use crate::eigen::{eigenpairs_in_interval, eigenvalues_symmetric, EigenPairs};
use crate::error::{Error, Result};
use crate::ids::{least_squares_fit, IdsTable};
use crate::lattice::{build_hamiltonian_with, sample_disorder, Boundary, HoppingKernel, LatticeGeometry, Model, Provenance};
use crate::stats::empirical_quantile;

/// Fewest `(box, realization)` samples accepted by [`bernoulli_sample`].
pub const MIN_BOX_SAMPLES: usize = 10_000;

/// Largest `N(I)|Λ_ℓ|` for which [`bernoulli_sample`] is informative.
pub const SMALL_PROBABILITY: f64 = 0.1;

/// `ℓ = ⌈c₁ log L⌉`, `ℓ' = ⌈c₂ log L⌉`.
pub fn scales(side: usize, c1: f64, c2: f64) -> (usize, usize) {
    let log = (side as f64).ln();
    ((c1 * log).ceil() as usize, (c2 * log).ceil() as usize)
}

/// Cubes `γ_j + [0, ℓ)^d` on a grid of pitch `ℓ + ℓ'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDecomposition {
    pub parent: LatticeGeometry,
    pub side: usize,
    pub buffer: usize,
    pub origins: Vec<Vec<usize>>,
    per_axis: usize,
}

impl BoxDecomposition {
    pub fn new(parent: &LatticeGeometry, side: usize, buffer: usize) -> Result<Self> {
        let big = parent.side();
        if side == 0 || buffer == 0 {
            return Err(Error::InvalidGeometry("box side and buffer must be at least 1".into()));
        }
        if side + buffer > big {
            return Err(Error::Infeasible { side, buffer, length: big });
        }
        let pitch = side + buffer;
        let per_axis = big / pitch;
        let d = parent.dimension();
        let count = per_axis.pow(d as u32);
        let origins = (0..count)
            .map(|mut j| {
                (0..d)
                    .map(|_| {
                        let q = j % per_axis;
                        j /= per_axis;
                        q * pitch
                    })
                    .collect()
            })
            .collect();
        Ok(Self { parent: parent.clone(), side, buffer, origins, per_axis })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn box_volume(&self) -> usize {
        self.side.pow(self.parent.dimension() as u32)
    }

    pub fn box_geometry(&self) -> LatticeGeometry {
        LatticeGeometry::new(self.parent.dimension(), self.side).expect("box side checked at construction")
    }

    /// Parent site indices of box `j`, in the box's own index order.
    pub fn box_sites(&self, j: usize) -> Vec<usize> {
        let local = self.box_geometry();
        let origin = &self.origins[j];
        (0..local.sites())
            .map(|s| {
                let c: Vec<usize> = local.coords(s).iter().zip(origin).map(|(a, o)| a + o).collect();
                self.parent.index(&c)
            })
            .collect()
    }

    /// Box containing `site`, if any.
    pub fn box_of(&self, site: usize) -> Option<usize> {
        let pitch = self.side + self.buffer;
        let mut j = 0;
        let mut weight = 1;
        for c in self.parent.coords(site) {
            let q = c / pitch;
            if q >= self.per_axis || c % pitch >= self.side {
                return None;
            }
            j += q * weight;
            weight *= self.per_axis;
        }
        Some(j)
    }

    pub fn leftover_sites(&self) -> Vec<usize> {
        (0..self.parent.sites()).filter(|&x| self.box_of(x).is_none()).collect()
    }

    pub fn leftover_fraction(&self) -> f64 {
        let covered = (self.len() * self.box_volume()) as f64;
        1.0 - covered / self.parent.sites() as f64
    }

    /// `2d·ℓ'/(ℓ+ℓ')`.
    pub fn leftover_bound(&self) -> f64 {
        2.0 * self.parent.dimension() as f64 * self.buffer as f64 / (self.side + self.buffer) as f64
    }
}

pub fn decompose(geometry: &LatticeGeometry, side: usize, buffer: usize) -> Result<BoxDecomposition> {
    BoxDecomposition::new(geometry, side, buffer)
}

/// Exponential fit of `log|φ(x)|` against the periodic distance to the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub xi: f64,
    pub prefactor: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterEstimate {
    /// Column of the eigenpair set.
    pub index: usize,
    pub energy: f64,
    pub center: usize,
    pub center_mass: f64,
    pub fit: Option<DecayFit>,
    /// All mass sits on the center site.
    pub point_mass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub provenance: Provenance,
    pub entries: Vec<CenterEstimate>,
}

impl LocalizationReport {
    pub fn median_xi(&self) -> Option<f64> {
        let xs: Vec<f64> = self.entries.iter().filter_map(|e| e.fit.map(|f| f.xi)).collect();
        (!xs.is_empty()).then(|| sorted_quantile(xs, 0.5))
    }
}

fn sorted_quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    empirical_quantile(&v, q)
}

const AMPLITUDE_FLOOR: f64 = 1e-14;

pub fn localization_centers(pairs: &EigenPairs<f64>, interval: (f64, f64)) -> LocalizationReport {
    let (a, b) = interval;
    let geometry = &pairs.spectrum.geometry;
    let mut entries = Vec::new();
    for j in 0..pairs.len() {
        let energy = pairs.value(j);
        if !(a <= energy && energy < b) {
            continue;
        }
        let v = pairs.vector(j);
        let mut center = 0;
        for (x, &u) in v.iter().enumerate() {
            if u * u > v[center] * v[center] {
                center = x;
            }
        }
        let center_mass = v[center] * v[center];
        let off_center: f64 = v.iter().enumerate().filter(|&(x, _)| x != center).map(|(_, u)| u * u).sum();
        let pts: Vec<(f64, f64)> = v
            .iter()
            .enumerate()
            .filter_map(|(x, &u)| {
                let r = geometry.distance(x, center);
                (r >= 2 && u.abs() > AMPLITUDE_FLOOR).then(|| (r as f64, u.abs().ln()))
            })
            .collect();
        let distinct = pts.iter().any(|p| p.0 != pts[0].0);
        let fit = distinct.then(|| {
            let (slope, intercept, residual) = least_squares_fit(&pts);
            DecayFit { xi: -slope, prefactor: intercept.exp(), residual, points: pts.len() }
        });
        entries.push(CenterEstimate {
            index: j,
            energy,
            center,
            center_mass,
            fit,
            point_mass: off_center <= AMPLITUDE_FLOOR * AMPLITUDE_FLOOR,
        });
    }
    LocalizationReport { provenance: pairs.spectrum.provenance.clone(), entries }
}

/// Box eigenvalues in `[a, b)` for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSpectra {
    pub provenance: Provenance,
    pub boxes: Vec<Vec<f64>>,
}

/// Eigenvalues of `H_ω(Λ_ℓ(γ_j))` in `[a, b)` for every box, using the
/// parent's disorder values on the box sites.
pub fn local_spectra(
    kernel: &HoppingKernel,
    disorder: &[f64],
    decomposition: &BoxDecomposition,
    interval: (f64, f64),
    boundary: Boundary,
) -> Result<Vec<Vec<f64>>> {
    if disorder.len() != decomposition.parent.sites() {
        return Err(Error::DimensionMismatch { expected: decomposition.parent.sites(), got: disorder.len() });
    }
    let (a, b) = interval;
    let local = decomposition.box_geometry();
    (0..decomposition.len())
        .into_par_iter()
        .map(|j| {
            let omega: Vec<f64> = decomposition.box_sites(j).into_iter().map(|x| disorder[x]).collect();
            let h = build_hamiltonian_with::<f64>(kernel, &local, &omega, boundary)?;
            Ok(eigenvalues_symmetric(&h)?.in_interval(a, b))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub box_index: usize,
    pub center: usize,
    pub global: f64,
    pub local: f64,
    pub error: f64,
}

/// Matching outcome for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationMatch {
    pub provenance: Provenance,
    pub pairs: Vec<MatchedPair>,
    /// Global eigenvalues in the window.
    pub in_window: usize,
    /// Of those, centers inside some box.
    pub in_boxes: usize,
    pub leftover_centers: usize,
    /// Includes leftover centers.
    pub unmatched: usize,
    pub multi_boxes: usize,
}

pub fn match_eigenvalues(
    centers: &LocalizationReport,
    locals: &LocalSpectra,
    decomposition: &BoxDecomposition,
) -> Result<RealizationMatch> {
    let (g, l) = (&centers.provenance, &locals.provenance);
    if g != l {
        return Err(Error::RealizationMismatch(g.realization, l.realization));
    }
    if locals.boxes.len() != decomposition.len() {
        return Err(Error::DimensionMismatch { expected: decomposition.len(), got: locals.boxes.len() });
    }
    let mut used: Vec<Vec<bool>> = locals.boxes.iter().map(|b| vec![false; b.len()]).collect();
    let mut entries: Vec<&CenterEstimate> = centers.entries.iter().collect();
    entries.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    let mut out = RealizationMatch {
        provenance: centers.provenance.clone(),
        pairs: Vec::new(),
        in_window: entries.len(),
        in_boxes: 0,
        leftover_centers: 0,
        unmatched: 0,
        multi_boxes: locals.boxes.iter().filter(|b| b.len() >= 2).count(),
    };
    for e in entries {
        let Some(j) = decomposition.box_of(e.center) else {
            out.leftover_centers += 1;
            out.unmatched += 1;
            continue;
        };
        out.in_boxes += 1;
        let best = locals.boxes[j]
            .iter()
            .enumerate()
            .filter(|&(k, _)| !used[j][k])
            .min_by(|p, q| (p.1 - e.energy).abs().total_cmp(&(q.1 - e.energy).abs()));
        match best {
            Some((k, &local)) => {
                used[j][k] = true;
                out.pairs.push(MatchedPair { box_index: j, center: e.center, global: e.energy, local, error: (local - e.energy).abs() });
            }
            None => out.unmatched += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReductionReport {
    pub side: usize,
    pub buffer: usize,
    pub realizations: Vec<RealizationMatch>,
}

impl ReductionReport {
    pub fn errors(&self) -> Vec<f64> {
        self.realizations.iter().flat_map(|r| r.pairs.iter().map(|p| p.error)).collect()
    }

    pub fn error_quantile(&self, q: f64) -> Option<f64> {
        let e = self.errors();
        (!e.is_empty()).then(|| sorted_quantile(e, q))
    }

    pub fn matched(&self) -> usize {
        self.realizations.iter().map(|r| r.pairs.len()).sum()
    }

    fn total(&self, f: impl Fn(&RealizationMatch) -> usize) -> usize {
        self.realizations.iter().map(f).sum()
    }

    /// Matched share of window eigenvalues whose centers lie in a box.
    pub fn matched_fraction(&self) -> f64 {
        self.matched() as f64 / self.total(|r| r.in_boxes).max(1) as f64
    }

    /// Matched share of all window eigenvalues.
    pub fn matched_fraction_of_window(&self) -> f64 {
        self.matched() as f64 / self.total(|r| r.in_window).max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("seed\trealization\tbox\tglobal\tlocal\terror\n");
        for r in &self.realizations {
            for p in &r.pairs {
                writeln!(out, "{}\t{}\t{}\t{:e}\t{:e}\t{:e}", r.provenance.seed, r.provenance.realization, p.box_index, p.global, p.local, p.error)
                    .unwrap();
            }
        }
        let q = |p| self.error_quantile(p).map_or("nan".to_string(), |v| format!("{v:e}"));
        writeln!(out, "# box_side = {}", self.side).unwrap();
        writeln!(out, "# buffer = {}", self.buffer).unwrap();
        writeln!(out, "# realizations = {}", self.realizations.len()).unwrap();
        writeln!(out, "# in_window = {}", self.total(|r| r.in_window)).unwrap();
        writeln!(out, "# in_boxes = {}", self.total(|r| r.in_boxes)).unwrap();
        writeln!(out, "# matched = {}", self.matched()).unwrap();
        writeln!(out, "# unmatched = {}", self.total(|r| r.unmatched)).unwrap();
        writeln!(out, "# leftover_centers = {}", self.total(|r| r.leftover_centers)).unwrap();
        writeln!(out, "# multi_boxes = {}", self.total(|r| r.multi_boxes)).unwrap();
        writeln!(out, "# error_median = {}", q(0.5)).unwrap();
        writeln!(out, "# error_p90 = {}", q(0.9)).unwrap();
        writeln!(out, "# error_max = {}", q(1.0)).unwrap();
        out
    }
}

/// `ξ̃` increment over `[x, y)` of the rescaled window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementCheck {
    pub x: f64,
    pub y: f64,
    /// `P(X = 1, x <= ξ̃ < y)` estimated from the boxes.
    pub empirical: f64,
    /// `[N(a + y|I|) - N(a + x|I|)]·|Λ_ℓ|`.
    pub predicted: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliReport {
    pub samples: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub standard_error: f64,
    /// Wilson 95% interval.
    pub confidence: (f64, f64),
    /// `N(I)|Λ_ℓ|`.
    pub expected: f64,
    pub ratio: f64,
    /// Rescaled positions `ξ̃ ∈ [0, 1]` of the single eigenvalues.
    pub positions: Vec<f64>,
    pub increments: Vec<IncrementCheck>,
}

/// Increments pass within this many standard errors.
pub const INCREMENT_TOLERANCE_SE: f64 = 3.0;

fn wilson(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let (n, p) = (n as f64, hits as f64 / n as f64);
    let denom = 1.0 + z * z / n;
    let mid = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

/// Statistics of `X = 1{exactly one box eigenvalue in I}` and of its
/// rescaled position, compared on consecutive pairs of the interior grid.
pub fn bernoulli_sample(
    batches: &[LocalSpectra],
    interval: (f64, f64),
    box_volume: usize,
    table: &IdsTable,
    grid: &[f64],
) -> Result<BernoulliReport> {
    let (a, b) = interval;
    if a >= b {
        return Err(Error::InvertedInterval(a, b));
    }
    if grid.iter().any(|&x| !(0.0 < x && x < 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("increment grid must increase inside (0, 1)".into()));
    }
    let volume = box_volume as f64;
    let expected = table.interval_mass(a, b)? * volume;
    if expected > SMALL_PROBABILITY {
        return Err(Error::Precondition(format!("N(I)|Λ_ℓ| = {expected} exceeds {SMALL_PROBABILITY}")));
    }
    let samples: usize = batches.iter().map(|s| s.boxes.len()).sum();
    if samples < MIN_BOX_SAMPLES {
        return Err(Error::TooFewRealizations { needed: MIN_BOX_SAMPLES, got: samples });
    }
    let mut positions = Vec::new();
    for s in batches {
        for values in &s.boxes {
            let inside: Vec<f64> = values.iter().copied().filter(|&e| a <= e && e < b).collect();
            if inside.len() == 1 {
                positions.push(((inside[0] - a) / (b - a)).clamp(0.0, 1.0));
            }
        }
    }
    let n = samples as f64;
    let hits = positions.len();
    let p_hat = hits as f64 / n;
    let standard_error = (p_hat * (1.0 - p_hat) / n).sqrt();
    let mut increments = Vec::new();
    for w in grid.windows(2) {
        let (x, y) = (w[0], w[1]);
        let count = positions.iter().filter(|&&t| x <= t && t < y).count();
        let empirical = count as f64 / n;
        let (ea, eb) = (a + x * (b - a), a + y * (b - a));
        let predicted = table.interval_mass(ea, eb)? * volume;
        let table_se = table.mass_standard_error(ea, eb)? * volume;
        let standard_error = (predicted * (1.0 - predicted) / n + table_se * table_se).sqrt();
        increments.push(IncrementCheck {
            x,
            y,
            empirical,
            predicted,
            standard_error,
            passed: (empirical - predicted).abs() <= INCREMENT_TOLERANCE_SE * standard_error,
        });
    }
    Ok(BernoulliReport {
        samples,
        hits,
        p_hat,
        standard_error,
        confidence: wilson(hits, samples, 1.959_963_984_540_054),
        expected,
        ratio: if expected > 0.0 { p_hat / expected } else { f64::NAN },
        positions,
        increments,
    })
}

/// Global eigenpairs in the window, centers, local spectra and matching for
/// one realization.
pub fn reduce_realization(
    model: &Model,
    geometry: &LatticeGeometry,
    seed: u64,
    realization: u64,
    decomposition: &BoxDecomposition,
    interval: (f64, f64),
    boundary: Boundary,
) -> Result<(LocalizationReport, RealizationMatch)> {
    let h = model.realize::<f64>(geometry, seed, realization)?;
    let pairs = eigenpairs_in_interval(&h, interval.0, interval.1)?;
    let centers = localization_centers(&pairs, interval);
    let locals = LocalSpectra {
        provenance: h.provenance().clone(),
        boxes: local_spectra(&model.kernel, h.disorder(), decomposition, interval, boundary)?,
    };
    let matched = match_eigenvalues(&centers, &locals, decomposition)?;
    Ok((centers, matched))
}

/// [`reduce_realization`] over a realization range, in parallel.
pub fn reduction_batch(
    model: &Model,
    geometry: &LatticeGeometry,
    seed: u64,
    realizations: Range<u64>,
    decomposition: &BoxDecomposition,
    interval: (f64, f64),
    boundary: Boundary,
) -> Result<(ReductionReport, Vec<LocalizationReport>)> {
    let runs: Vec<(LocalizationReport, RealizationMatch)> = realizations
        .into_par_iter()
        .map(|r| reduce_realization(model, geometry, seed, r, decomposition, interval, boundary))
        .collect::<Result<_>>()?;
    let (centers, matches) = runs.into_iter().unzip();
    Ok((ReductionReport { side: decomposition.side, buffer: decomposition.buffer, realizations: matches }, centers))
}

/// Box spectra in the window for each realization of the range.
pub fn local_batch(
    model: &Model,
    geometry: &LatticeGeometry,
    seed: u64,
    realizations: Range<u64>,
    decomposition: &BoxDecomposition,
    interval: (f64, f64),
    boundary: Boundary,
) -> Result<Vec<LocalSpectra>> {
    realizations
        .into_par_iter()
        .map(|r| {
            let omega = sample_disorder(&model.disorder, geometry, seed, r);
            Ok(LocalSpectra {
                provenance: Provenance { model_id: model.id(), seed, realization: r },
                boxes: local_spectra(&model.kernel, &omega, decomposition, interval, boundary)?,
            })
        })
        .collect()
}
