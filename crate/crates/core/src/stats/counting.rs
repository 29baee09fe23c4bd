use statrs::distribution::{ContinuousCDF, Normal};

use super::report::{ks_distance, moments, TestReport};
use crate::error::{Error, Result};

pub const CLT_MIN_REALIZATIONS: usize = 1000;
/// Below this mean the normal approximation is not expected to hold.
pub const CLT_MIN_MEAN: f64 = 50.0;

/// Eigenvalue counts in a fixed interval across realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub counts: Vec<u64>,
    /// `N(I)|Λ|`.
    pub target_mean: f64,
}

impl CountReport {
    pub fn new(counts: Vec<u64>, target_mean: f64) -> Result<Self> {
        if !(target_mean > 0.0) {
            return Err(Error::Precondition("target mean must be positive".into()));
        }
        Ok(Self { counts, target_mean })
    }

    /// `(count - N(I)|Λ|) / (N(I)|Λ|)^{1/2}`.
    pub fn normalized(&self) -> Vec<f64> {
        let s = self.target_mean.sqrt();
        self.counts.iter().map(|&c| (c as f64 - self.target_mean) / s).collect()
    }

    /// Mean, variance, skewness, excess kurtosis of the raw counts.
    pub fn moments(&self) -> (f64, f64, f64, f64) {
        let x: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        moments(&x)
    }
}

/// Normal-limit diagnostics for a [`CountReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    /// KS distance of the normalized counts to the standard normal.
    pub ks: TestReport,
    /// `|skewness|` of the counts.
    pub skewness: TestReport,
    /// KS evaluated at half-integer count boundaries, which removes the
    /// lattice jump of integer counts.
    pub ks_continuity_corrected: f64,
    pub mean: f64,
    pub variance: f64,
    pub excess_kurtosis: f64,
    /// Set when `N(I)|Λ|` is below [`CLT_MIN_MEAN`].
    pub low_mean: bool,
}

impl CltReport {
    pub fn passed(&self) -> bool {
        self.ks.passed && self.skewness.passed
    }
}

pub fn clt_report(report: &CountReport, ks_threshold: f64, skew_threshold: f64) -> Result<CltReport> {
    let n = report.counts.len();
    if n < CLT_MIN_REALIZATIONS {
        return Err(Error::TooFewRealizations { needed: CLT_MIN_REALIZATIONS, got: n });
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = report.normalized();
    let ks = ks_distance(&z, |x| normal.cdf(x));
    let (mean, variance, skew, kurt) = report.moments();
    let corrected = continuity_corrected_ks(&report.counts, report.target_mean, &normal);
    Ok(CltReport {
        ks: TestReport::new("clt_ks_normal", ks, n, ks_threshold).with_extra("ks_continuity_corrected", corrected),
        skewness: TestReport::new("clt_abs_skewness", skew.abs(), n, skew_threshold),
        ks_continuity_corrected: corrected,
        mean,
        variance,
        excess_kurtosis: kurt,
        low_mean: report.target_mean < CLT_MIN_MEAN,
    })
}

/// `max_k |F_n(k) - Φ((k + 1/2 - μ)/√μ)|` over observed integer counts.
fn continuity_corrected_ks(counts: &[u64], mu: f64, normal: &Normal) -> f64 {
    let mut c = counts.to_vec();
    c.sort_unstable();
    let n = c.len() as f64;
    let s = mu.sqrt();
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < c.len() {
        let k = c[i];
        let below = i as f64 / n;
        while i < c.len() && c[i] == k {
            i += 1;
        }
        let upto = i as f64 / n;
        d = d.max((upto - normal.cdf((k as f64 + 0.5 - mu) / s)).abs());
        d = d.max((below - normal.cdf((k as f64 - 0.5 - mu) / s)).abs());
    }
    d
}

/// Fraction of realizations with `|count - N(I)|Λ|| >= (N(I)|Λ|)^γ` per γ.
pub fn deviation_report(report: &CountReport, gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if gammas.is_empty() {
        return Err(Error::Precondition("empty exponent grid".into()));
    }
    if report.counts.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = report.counts.len() as f64;
    Ok(gammas
        .iter()
        .map(|&g| {
            let thr = report.target_mean.powf(g);
            let hits = report.counts.iter().filter(|&&c| (c as f64 - report.target_mean).abs() >= thr).count();
            (g, hits as f64 / n)
        })
        .collect())
}

/// Whether deviation fractions are nonincreasing in γ (sorted by γ).
pub fn decays_monotonically(rows: &[(f64, f64)]) -> bool {
    let mut r = rows.to_vec();
    r.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    r.windows(2).all(|w| w[1].1 <= w[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_counts_fail_with_half() {
        let r = CountReport::new(vec![100; 1000], 100.0).unwrap();
        let c = clt_report(&r, 0.05, 0.15).unwrap();
        assert!((c.ks.statistic - 0.5).abs() < 1e-12);
        assert!(!c.passed());
    }

    #[test]
    fn too_few_realizations_is_error() {
        let r = CountReport::new(vec![100; 999], 100.0).unwrap();
        assert!(clt_report(&r, 0.05, 0.15).is_err());
    }

    #[test]
    fn deviation_edge_cases() {
        let r = CountReport::new(vec![90, 100, 110], 100.0).unwrap();
        assert!(deviation_report(&r, &[]).is_err());
        let rows = deviation_report(&r, &[0.5, 0.99]).unwrap();
        assert_eq!(rows[0].1, 2.0 / 3.0);
        assert_eq!(rows[1].1, 0.0);
    }
}
