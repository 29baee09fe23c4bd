use crate::eigen::SpectrumSample;
use crate::error::{Error, Result};
use crate::ids::IdsTable;

/// Unfolded nearest-neighbour spacings inside an energy window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpacingsReport {
    /// `|Λ|(N(E_{j+1}) - N(E_j))` for consecutive eigenvalues both in the window.
    pub spacings: Vec<f64>,
    /// Number of eigenvalues in the window, summed over pooled realizations.
    pub eigenvalues_in_window: usize,
    pub realizations: usize,
}

impl SpacingsReport {
    pub fn pool(reports: impl IntoIterator<Item = SpacingsReport>) -> Self {
        let mut out = Self::default();
        for r in reports {
            out.spacings.extend(r.spacings);
            out.eigenvalues_in_window += r.eigenvalues_in_window;
            out.realizations += r.realizations;
        }
        out
    }
}

pub fn spacings(sample: &SpectrumSample<f64>, table: &IdsTable, a: f64, b: f64) -> Result<SpacingsReport> {
    if !(a < b) {
        return Err(Error::InvertedInterval(a, b));
    }
    let p = &sample.provenance;
    if p.model_id != table.model_id() {
        return Err(Error::ModelMismatch { table: table.model_id().into(), sample: p.model_id.clone() });
    }
    if table.provenance().contains(p.seed, p.realization) {
        return Err(Error::ProvenanceOverlap { seed: p.seed, realization: p.realization });
    }
    if let Some(w) = sample.window {
        if w.lo > a || w.hi < b {
            return Err(Error::WindowNotCovered { lo: w.lo, hi: w.hi, req_lo: a, req_hi: b });
        }
    }
    let volume = sample.sites() as f64;
    let inside: Vec<f64> = sample
        .eigenvalues
        .iter()
        .filter(|&&e| e >= a && e < b)
        .map(|&e| table.evaluate(e).map(|n| volume * n))
        .collect::<Result<_>>()?;
    let spacings = inside.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    Ok(SpacingsReport { spacings, eigenvalues_in_window: inside.len(), realizations: 1 })
}

/// Empirical level-spacing survival function.
#[derive(Debug, Clone, PartialEq)]
pub struct DlsCurve {
    /// Sorted distinct spacing values.
    pub grid: Vec<f64>,
    /// `DLS(x) = #{spacings >= x} / n` at each grid point.
    pub survival: Vec<f64>,
    /// `sup_x |DLS(x) - e^{-x}|`, including one-sided limits at jumps.
    pub sup_distance: f64,
    pub normalizer: usize,
}

/// Survival curve normalized by the number of pooled spacings.
pub fn dls(report: &SpacingsReport) -> Result<DlsCurve> {
    let n = report.spacings.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(survival_curve(&report.spacings))
}

pub(crate) fn survival_curve(spacings: &[f64]) -> DlsCurve {
    let mut v = spacings.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite spacing"));
    let n = v.len();
    let nf = n as f64;
    let mut grid = Vec::new();
    let mut survival = Vec::new();
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = v[i];
        let mut j = i;
        while j < n && v[j] == x {
            j += 1;
        }
        let at = (n - i) as f64 / nf;
        let after = (n - j) as f64 / nf;
        let target = (-x).exp();
        sup = sup.max((at - target).abs()).max((after - target).abs());
        grid.push(x);
        survival.push(at);
        i = j;
    }
    DlsCurve { grid, survival, sup_distance: sup, normalizer: n }
}

impl DlsCurve {
    pub fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        // first grid point >= x carries #{>= x}
        let k = self.grid.partition_point(|&g| g < x);
        self.survival.get(k).copied().unwrap_or(0.0)
    }
}
