//! Pooled empirical integrated density of states.
//!
//! A table stores cumulative integer counts at sorted energy knots together
//! with the pooled number of sites, so pooling is exact and order
//! independent. Two routes fill it:
//!
//! * spectrum route: knots are the pooled eigenvalues of full spectra;
//! * counting route: knots are a fixed energy grid and counts come from
//!   inertia (`count_below`), which avoids diagonalization on large pools.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use crate::eigen::{counts_below, eigenvalues_symmetric, SpectrumSample};
use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Spectrum,
    Counting,
}

impl Route {
    fn name(self) -> &'static str {
        match self {
            Route::Spectrum => "spectrum",
            Route::Counting => "counting",
        }
    }
}

/// Set of `(seed, realization)` pairs stored as merged half-open ranges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedRanges {
    ranges: Vec<(u64, u64, u64)>,
}

impl SeedRanges {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(seed: u64, realizations: Range<u64>) -> Self {
        let mut s = Self::new();
        s.insert(seed, realizations);
        s
    }

    pub fn insert(&mut self, seed: u64, realizations: Range<u64>) {
        if realizations.is_empty() {
            return;
        }
        self.ranges.push((seed, realizations.start, realizations.end));
        self.ranges.sort_unstable();
        let mut merged: Vec<(u64, u64, u64)> = Vec::with_capacity(self.ranges.len());
        for &(s, a, b) in &self.ranges {
            match merged.last_mut() {
                Some(last) if last.0 == s && a <= last.2 => last.2 = last.2.max(b),
                _ => merged.push((s, a, b)),
            }
        }
        self.ranges = merged;
    }

    pub fn union(&mut self, other: &SeedRanges) {
        for &(s, a, b) in &other.ranges {
            self.insert(s, a..b);
        }
    }

    pub fn contains(&self, seed: u64, realization: u64) -> bool {
        self.ranges
            .iter()
            .any(|&(s, a, b)| s == seed && (a..b).contains(&realization))
    }

    /// Some pair present in both sets, if any.
    pub fn first_overlap(&self, other: &SeedRanges) -> Option<(u64, u64)> {
        for &(s, a, b) in &self.ranges {
            for &(t, c, d) in &other.ranges {
                if s == t && a.max(c) < b.min(d) {
                    return Some((s, a.max(c)));
                }
            }
        }
        None
    }

    pub fn ranges(&self) -> &[(u64, u64, u64)] {
        &self.ranges
    }

    fn encode(&self) -> String {
        let parts: Vec<String> = self.ranges.iter().map(|(s, a, b)| format!("{s}:{a}-{b}")).collect();
        parts.join(",")
    }

    fn decode(text: &str) -> Option<Self> {
        let mut out = Self::new();
        for part in text.split(',').filter(|p| !p.is_empty()) {
            let (seed, range) = part.split_once(':')?;
            let (a, b) = range.split_once('-')?;
            out.insert(seed.parse().ok()?, a.parse().ok()?..b.parse().ok()?);
        }
        Some(out)
    }
}

/// Anchor for [`IdsTable::interval_for_mass`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// Interval centered in IDS measure around this energy.
    Interior(f64),
    /// Interval starting at this spectral edge.
    LowerEdge(f64),
}

/// Result of [`IdsTable::lifshitz_exponent_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LifshitzFit {
    pub rho: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    /// `(a, N(E₋ + a))` pairs entering the fit.
    pub used: Vec<(f64, f64)>,
    /// Offsets skipped because the table has no mass there.
    pub skipped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdsTable {
    model_id: String,
    route: Route,
    knots: Vec<f64>,
    counts: Vec<u64>,
    sites: u64,
    realizations: u64,
    provenance: SeedRanges,
}

impl IdsTable {
    /// Empty spectrum-route table.
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            route: Route::Spectrum,
            knots: Vec::new(),
            counts: Vec::new(),
            sites: 0,
            realizations: 0,
            provenance: SeedRanges::new(),
        }
    }

    /// Empty counting-route table on a fixed grid.
    pub fn on_grid(model_id: impl Into<String>, mut grid: Vec<f64>) -> Result<Self> {
        if grid.iter().any(|e| !e.is_finite()) {
            return Err(Error::Precondition("grid energies must be finite".into()));
        }
        grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        grid.dedup();
        let n = grid.len();
        Ok(Self {
            route: Route::Counting,
            counts: vec![0; n],
            knots: grid,
            ..Self::new(model_id)
        })
    }

    /// Table from explicit cumulative counts (validated).
    pub fn from_counts(
        model_id: impl Into<String>,
        route: Route,
        knots: Vec<f64>,
        counts: Vec<u64>,
        sites: u64,
        realizations: u64,
        provenance: SeedRanges,
    ) -> Result<Self> {
        if knots.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: knots.len(), got: counts.len() });
        }
        let sorted = knots.windows(2).all(|w| w[0] < w[1]) && knots.iter().all(|e| e.is_finite());
        let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
        if !sorted || !monotone || counts.last().is_some_and(|&c| c > sites) {
            return Err(Error::Precondition("knots must increase and counts must be monotone within pooled sites".into()));
        }
        Ok(Self { model_id: model_id.into(), route, knots, counts, sites, realizations, provenance })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pooled_sites(&self) -> u64 {
        self.sites
    }

    pub fn realizations(&self) -> u64 {
        self.realizations
    }

    pub fn provenance(&self) -> &SeedRanges {
        &self.provenance
    }

    pub fn is_empty(&self) -> bool {
        self.sites == 0 || self.knots.is_empty()
    }

    fn fraction(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.sites as f64
    }

    /// Pooled count at the largest knot `<= e` (0 below the first knot).
    pub fn cumulative_count_at(&self, e: f64) -> u64 {
        match self.knots.partition_point(|&x| x <= e) {
            0 => 0,
            j => self.counts[j - 1],
        }
    }

    /// Fractions at the knots.
    pub fn fractions(&self) -> Vec<f64> {
        (0..self.knots.len()).map(|i| self.fraction(i)).collect()
    }

    /// Pools one full spectrum (spectrum route).
    pub fn accumulate(self, sample: &SpectrumSample<f64>) -> Result<Self> {
        let single = Self::from_sample(&self.model_id, sample)?;
        self.merge(&single)
    }

    fn from_sample(model_id: &str, s: &SpectrumSample<f64>) -> Result<Self> {
        if !s.is_full() {
            return Err(Error::PartialSpectrum);
        }
        if s.provenance.model_id != model_id {
            return Err(Error::ModelMismatch { table: model_id.to_string(), sample: s.provenance.model_id.clone() });
        }
        let mut b = IdsBuilder::new(model_id);
        b.add(s)?;
        Ok(b.finish())
    }

    /// Adds one realization's counts on the table grid (counting route).
    pub fn accumulate_counts(&mut self, seed: u64, realization: u64, counts: &[usize], sites: usize) -> Result<()> {
        if self.route != Route::Counting {
            return Err(Error::BatchMismatch("count accumulation needs a counting-route table".into()));
        }
        if counts.len() != self.knots.len() {
            return Err(Error::DimensionMismatch { expected: self.knots.len(), got: counts.len() });
        }
        if counts.windows(2).any(|w| w[0] > w[1]) || counts.last().is_some_and(|&c| c > sites) {
            return Err(Error::Precondition("counts must be monotone and at most the volume".into()));
        }
        for (acc, &c) in self.counts.iter_mut().zip(counts) {
            *acc += c as u64;
        }
        self.sites += sites as u64;
        self.realizations += 1;
        self.provenance.insert(seed, realization..realization + 1);
        Ok(())
    }

    /// Pools two tables of the same model and route; associative and
    /// commutative.
    pub fn merge(&self, other: &IdsTable) -> Result<IdsTable> {
        if self.model_id != other.model_id {
            return Err(Error::ModelMismatch { table: self.model_id.clone(), sample: other.model_id.clone() });
        }
        if self.sites == 0 {
            return Ok(IdsTable { route: other.route, ..other.clone() });
        }
        if other.sites == 0 {
            return Ok(self.clone());
        }
        if self.route != other.route {
            return Err(Error::BatchMismatch("cannot pool spectrum-route and counting-route tables".into()));
        }
        let (knots, counts) = match self.route {
            Route::Counting => {
                if self.knots != other.knots {
                    return Err(Error::BatchMismatch("counting tables use different grids".into()));
                }
                (self.knots.clone(), self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect())
            }
            Route::Spectrum => merge_steps(&self.knots, &self.counts, &other.knots, &other.counts),
        };
        let mut provenance = self.provenance.clone();
        provenance.union(&other.provenance);
        Ok(IdsTable {
            model_id: self.model_id.clone(),
            route: self.route,
            knots,
            counts,
            sites: self.sites + other.sites,
            realizations: self.realizations + other.realizations,
            provenance,
        })
    }

    /// `N(E)`: linear interpolation between knots, 0 below the first knot,
    /// 1 above the last.
    pub fn evaluate(&self, e: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let k = &self.knots;
        if e < k[0] {
            return Ok(0.0);
        }
        let last = k.len() - 1;
        if e > k[last] {
            return Ok(1.0);
        }
        // first knot strictly above e
        let j = k.partition_point(|&x| x <= e);
        if j == 0 {
            return Ok(self.fraction(0));
        }
        let i = j - 1;
        if k[i] == e || i == last {
            return Ok(self.fraction(i));
        }
        let (f0, f1) = (self.fraction(i), self.fraction(j));
        let t = (e - k[i]) / (k[j] - k[i]);
        Ok((f0 + t * (f1 - f0)).clamp(f0, f1))
    }

    /// `N(I) = N(b) - N(a)`.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::InvertedInterval(a, b));
        }
        if a == b {
            self.evaluate(a)?;
            return Ok(0.0);
        }
        Ok((self.evaluate(b)? - self.evaluate(a)?).max(0.0))
    }

    /// Leftmost energy with `N(E) = q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidQuantile(q));
        }
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let n = self.knots.len();
        let i = (0..n).position(|i| self.fraction(i) >= q);
        let i = match i {
            // q above the last knot value: the table saturates there
            None => return Ok(self.knots[n - 1]),
            Some(i) => i,
        };
        if i == 0 {
            return Ok(self.knots[0]);
        }
        let (f0, f1) = (self.fraction(i - 1), self.fraction(i));
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        let t = (q - f0) / (f1 - f0);
        Ok((x0 + t * (x1 - x0)).clamp(x0, x1))
    }

    /// Interval carrying mass `m/|Λ|` at the given anchor.
    pub fn interval_for_mass(&self, anchor: Anchor, m: f64, volume: usize) -> Result<(f64, f64)> {
        let q = m / volume as f64;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InsufficientMass { requested: q, available: 1.0 });
        }
        match anchor {
            Anchor::Interior(e0) => {
                if m == 0.0 {
                    self.evaluate(e0)?;
                    return Ok((e0, e0));
                }
                let c = self.evaluate(e0)?;
                let (lo, hi) = (c - q / 2.0, c + q / 2.0);
                if lo < 0.0 || hi > 1.0 {
                    return Err(Error::InsufficientMass { requested: q / 2.0, available: c.min(1.0 - c) });
                }
                Ok((self.quantile(lo)?, self.quantile(hi)?))
            }
            Anchor::LowerEdge(edge) => {
                let base = self.evaluate(edge)?;
                if base + q > 1.0 {
                    return Err(Error::InsufficientMass { requested: q, available: 1.0 - base });
                }
                if m == 0.0 {
                    return Ok((edge, edge));
                }
                Ok((edge, self.quantile(base + q)?.max(edge)))
            }
        }
    }

    /// Binomial standard error of `N(I)` from the pooled site count.
    pub fn mass_standard_error(&self, a: f64, b: f64) -> Result<f64> {
        let p = self.interval_mass(a, b)?;
        Ok((p * (1.0 - p) / self.sites as f64).sqrt())
    }

    /// Least-squares slope of `log(-log N(E₋+a))` against `log a`.
    pub fn lifshitz_exponent_fit(&self, edge: f64, offsets: &[f64]) -> Result<LifshitzFit> {
        let mut used = Vec::new();
        let mut skipped = Vec::new();
        for &a in offsets {
            if a <= 0.0 {
                return Err(Error::Precondition(format!("offset {a} must be positive")));
            }
            let n = self.evaluate(edge + a)?;
            if n > 0.0 && n < 1.0 {
                used.push((a, n));
            } else {
                skipped.push(a);
            }
        }
        if used.len() < 3 {
            return Err(Error::TooFewPoints { needed: 3, got: used.len() });
        }
        let pts: Vec<(f64, f64)> = used.iter().map(|&(a, n)| (a.ln(), (-n.ln()).ln())).collect();
        let (slope, intercept, residual_norm) = least_squares_fit(&pts);
        Ok(LifshitzFit { rho: -slope, intercept, residual_norm, used, skipped })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# integrated density of states").unwrap();
        writeln!(out, "model_id\t{}", self.model_id).unwrap();
        writeln!(out, "route\t{}", self.route.name()).unwrap();
        writeln!(out, "pooled_sites\t{}", self.sites).unwrap();
        writeln!(out, "realizations\t{}", self.realizations).unwrap();
        writeln!(out, "provenance\t{}", self.provenance.encode()).unwrap();
        writeln!(out, "energy\tcumulative_fraction").unwrap();
        for i in 0..self.knots.len() {
            writeln!(out, "{}\t{}", self.knots[i], self.fraction(i)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let bad = |message: String| Error::Parse { path: origin.to_string(), message };
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {name}")))?;
            match line.split_once('\t') {
                Some((k, v)) if k == name => Ok(v.to_string()),
                _ => Err(bad(format!("expected `{name}`, found `{line}`"))),
            }
        };
        let model_id = field("model_id")?;
        let route = match field("route")?.as_str() {
            "spectrum" => Route::Spectrum,
            "counting" => Route::Counting,
            other => return Err(bad(format!("unknown route `{other}`"))),
        };
        let sites: u64 = field("pooled_sites")?.parse().map_err(|e| bad(format!("pooled_sites: {e}")))?;
        let realizations: u64 = field("realizations")?.parse().map_err(|e| bad(format!("realizations: {e}")))?;
        let provenance = SeedRanges::decode(&field("provenance")?).ok_or_else(|| bad("provenance".into()))?;
        if field("energy")? != "cumulative_fraction" {
            return Err(bad("missing column header".into()));
        }
        let mut knots = Vec::new();
        let mut counts = Vec::new();
        for line in lines {
            let (e, f) = line.split_once('\t').ok_or_else(|| bad(format!("row `{line}`")))?;
            let e: f64 = e.parse().map_err(|_| bad(format!("energy `{e}`")))?;
            let f: f64 = f.parse().map_err(|_| bad(format!("fraction `{f}`")))?;
            let c = (f * sites as f64).round() as u64;
            if c as f64 / sites as f64 != f {
                return Err(bad(format!("fraction {f} is not a count over {sites} sites")));
            }
            knots.push(e);
            counts.push(c);
        }
        Self::from_counts(model_id, route, knots, counts, sites, realizations, provenance)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Sum of two right-continuous step functions given by cumulative counts
/// at their jump points, evaluated on the union of jump points.
fn merge_steps(ka: &[f64], ca: &[u64], kb: &[f64], cb: &[u64]) -> (Vec<f64>, Vec<u64>) {
    let mut knots = Vec::with_capacity(ka.len() + kb.len());
    let mut counts = Vec::with_capacity(ka.len() + kb.len());
    let (mut i, mut j) = (0, 0);
    let (mut a, mut b) = (0u64, 0u64);
    while i < ka.len() || j < kb.len() {
        let x = match (ka.get(i), kb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if i < ka.len() && ka[i] == x {
            a = ca[i];
            i += 1;
        }
        if j < kb.len() && kb[j] == x {
            b = cb[j];
            j += 1;
        }
        knots.push(x);
        counts.push(a + b);
    }
    (knots, counts)
}

/// `(slope, intercept, ‖residual‖₂)` of the least-squares line.
pub fn least_squares_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().sqrt();
    (slope, intercept, res)
}

/// Collects full spectra and sorts once at the end; cheaper than repeated
/// [`IdsTable::accumulate`] for large pools.
#[derive(Debug, Clone)]
pub struct IdsBuilder {
    model_id: String,
    values: Vec<f64>,
    sites: u64,
    realizations: u64,
    provenance: SeedRanges,
}

impl IdsBuilder {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), values: Vec::new(), sites: 0, realizations: 0, provenance: SeedRanges::new() }
    }

    pub fn add(&mut self, s: &SpectrumSample<f64>) -> Result<()> {
        if !s.is_full() {
            return Err(Error::PartialSpectrum);
        }
        if s.provenance.model_id != self.model_id {
            return Err(Error::ModelMismatch { table: self.model_id.clone(), sample: s.provenance.model_id.clone() });
        }
        self.values.extend_from_slice(&s.eigenvalues);
        self.sites += s.sites() as u64;
        self.realizations += 1;
        self.provenance.insert(s.provenance.seed, s.provenance.realization..s.provenance.realization + 1);
        Ok(())
    }

    pub fn finish(mut self) -> IdsTable {
        self.values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        let mut knots = Vec::new();
        let mut counts = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if knots.last() == Some(&v) {
                *counts.last_mut().unwrap() = i as u64 + 1;
            } else {
                knots.push(v);
                counts.push(i as u64 + 1);
            }
        }
        IdsTable {
            model_id: self.model_id,
            route: Route::Spectrum,
            knots,
            counts,
            sites: self.sites,
            realizations: self.realizations,
            provenance: self.provenance,
        }
    }
}

/// Spectrum-route table from full diagonalization of each realization.
pub fn pool_spectra(model: &Model, geometry: &LatticeGeometry, seed: u64, realizations: Range<u64>) -> Result<IdsTable> {
    let spectra: Vec<SpectrumSample<f64>> = realizations
        .into_par_iter()
        .map(|r| eigenvalues_symmetric(&model.realize::<f64>(geometry, seed, r)?))
        .collect::<Result<_>>()?;
    let mut b = IdsBuilder::new(model.id());
    for s in &spectra {
        b.add(s)?;
    }
    Ok(b.finish())
}

/// Counting-route table on `grid` from inertia counts of each realization.
pub fn pool_counts(
    model: &Model,
    geometry: &LatticeGeometry,
    seed: u64,
    realizations: Range<u64>,
    grid: Vec<f64>,
) -> Result<IdsTable> {
    let mut table = IdsTable::on_grid(model.id(), grid)?;
    let knots = table.knots().to_vec();
    let per: Vec<(u64, Vec<usize>)> = realizations
        .into_par_iter()
        .map(|r| Ok((r, counts_below(&model.realize::<f64>(geometry, seed, r)?, &knots)?)))
        .collect::<Result<_>>()?;
    for (r, c) in per {
        table.accumulate_counts(seed, r, &c, geometry.sites())?;
    }
    Ok(table)
}

/// Sorted union of `coarse` points across `[lo, hi]` and each focus range
/// `(a, b, points)`.
pub fn counting_grid(lo: f64, hi: f64, coarse: usize, focus: &[(f64, f64, usize)]) -> Vec<f64> {
    let mut grid = linspace(lo, hi, coarse.max(2));
    for &(a, b, k) in focus {
        grid.extend(linspace(a, b, k.max(2)));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    grid
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
