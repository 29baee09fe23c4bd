use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonLaw};

use super::report::{null_quantile, NullSpec, TestReport};
use super::spacing::survival_curve;
use super::unfold::PointProcessBatch;
use crate::error::{Error, Result};

/// Minimum realizations for the counting test.
pub const MIN_REALIZATIONS: usize = 500;

/// Total-variation distance between the empirical law of `counts` and
/// Poisson(`mean`), tail beyond the largest observed count included.
pub fn tv_to_poisson(counts: &[usize], mean: f64) -> f64 {
    let law = PoissonLaw::new(mean).expect("positive mean");
    let kmax = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; kmax + 1];
    for &c in counts {
        hist[c] += 1;
    }
    let n = counts.len() as f64;
    let mut covered = 0.0;
    let mut l1 = 0.0;
    for (k, &h) in hist.iter().enumerate() {
        let p = law.pmf(k as u64);
        covered += p;
        l1 += (h as f64 / n - p).abs();
    }
    0.5 * (l1 + (1.0 - covered).max(0.0))
}

/// Pearson chi-square against Poisson(`mean`) with cells merged until each
/// expects at least 5; returns `(statistic, degrees of freedom)`.
pub fn chi_square_poisson(counts: &[usize], mean: f64) -> (f64, usize) {
    let law = PoissonLaw::new(mean).expect("positive mean");
    let n = counts.len() as f64;
    let kmax = counts.iter().copied().max().unwrap_or(0).max((mean + 10.0 * mean.sqrt()) as usize);
    let mut hist = vec![0usize; kmax + 2];
    for &c in counts {
        hist[c] += 1;
    }
    // cells [lo, hi] with the final cell open-ended
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut cdf = 0.0;
    for k in 0..=kmax {
        let p = law.pmf(k as u64);
        cdf += p;
        obs += hist[k] as f64;
        exp += n * p;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    obs += hist[kmax + 1] as f64;
    exp += n * (1.0 - cdf).max(0.0);
    match cells.last_mut() {
        Some(last) if exp < 5.0 => {
            last.0 += obs;
            last.1 += exp;
        }
        _ => cells.push((obs, exp)),
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len().saturating_sub(1))
}

/// Null 99th percentile of [`tv_to_poisson`] for `n` Poisson(`mean`) draws.
pub fn tv_null_threshold(mean: f64, n: usize, spec: NullSpec) -> f64 {
    let law = Poisson::new(mean).expect("positive mean");
    null_quantile(spec, |rng| {
        let counts: Vec<usize> = (0..n).map(|_| law.sample(rng) as usize).collect();
        tv_to_poisson(&counts, mean)
    })
}

/// Counting test of the unfolded batch in the subwindow `[a, b)` against
/// Poisson(`b - a`).
pub fn poisson_count_test(batch: &PointProcessBatch, a: f64, b: f64, threshold: f64) -> Result<TestReport> {
    if a >= b || a < -batch.half_width || b > batch.half_width {
        return Err(Error::Precondition(format!("subwindow [{a}, {b}) must lie inside the batch window")));
    }
    if batch.len() < MIN_REALIZATIONS {
        return Err(Error::TooFewRealizations { needed: MIN_REALIZATIONS, got: batch.len() });
    }
    let counts = batch.counts_in(a, b);
    let mean = b - a;
    let tv = tv_to_poisson(&counts, mean);
    let (chi2, dof) = chi_square_poisson(&counts, mean);
    let p_value = if dof > 0 { 1.0 - ChiSquared::new(dof as f64).expect("dof").cdf(chi2) } else { f64::NAN };
    let observed = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Ok(TestReport::new("poisson_count_tv", tv, counts.len(), threshold)
        .with_extra("chi_square", chi2)
        .with_extra("chi_square_dof", dof as f64)
        .with_extra("chi_square_p", p_value)
        .with_extra("mean_count", observed)
        .with_extra("expected_count", mean))
}

/// Pearson correlation of per-realization counts in two windows.
pub fn count_correlation(batch: &PointProcessBatch, w1: (f64, f64), w2: (f64, f64)) -> f64 {
    let x: Vec<f64> = batch.counts_in(w1.0, w1.1).into_iter().map(|c| c as f64).collect();
    let y: Vec<f64> = batch.counts_in(w2.0, w2.1).into_iter().map(|c| c as f64).collect();
    pearson(&x, &y)
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    Lower,
    Upper,
}

/// Fraction of atoms on the wrong side of an edge anchor by more than
/// `margin`; passes when the fraction is at most `threshold`.
pub fn half_line_check(batch: &PointProcessBatch, side: EdgeSide, margin: f64, threshold: f64) -> TestReport {
    let atoms: Vec<f64> = batch.samples.iter().flat_map(|s| s.values.iter().copied()).collect();
    let bad = atoms
        .iter()
        .filter(|&&x| match side {
            EdgeSide::Lower => x < -margin,
            EdgeSide::Upper => x > margin,
        })
        .count();
    let fraction = if atoms.is_empty() { 0.0 } else { bad as f64 / atoms.len() as f64 };
    TestReport::new("half_line_violation", fraction, atoms.len(), threshold).with_extra("margin", margin)
}

/// Unit-intensity Poisson configuration on `[lo, hi]`, sorted.
pub fn poisson_process(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = lo;
    loop {
        let step: f64 = Exp1.sample(rng);
        x += step;
        if x > hi {
            return out;
        }
        out.push(x);
    }
}

/// Which sup-distance of pooled in-window spacings a null is run for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingStatistic {
    /// KS distance to the Exp(1) CDF.
    Ks,
    /// Sup distance of the survival curve to `e^{-x}`.
    Dls,
}

/// Spacing statistic of pooled in-window spacings.
pub fn spacing_statistic(spacings: &[f64], which: SpacingStatistic) -> f64 {
    match which {
        SpacingStatistic::Ks => super::report::ks_distance(spacings, |x| 1.0 - (-x.max(0.0)).exp()),
        SpacingStatistic::Dls => survival_curve(spacings).sup_distance,
    }
}

/// Null threshold for a spacing statistic: `realizations` unit Poisson
/// processes on `[-s, s]`, spacings pooled exactly as for the data.
pub fn spacing_null_threshold(half_width: f64, realizations: usize, which: SpacingStatistic, spec: NullSpec) -> f64 {
    null_quantile(spec, |rng| {
        let mut sp = Vec::new();
        for _ in 0..realizations {
            let p = poisson_process(rng, -half_width, half_width);
            sp.extend(p.windows(2).map(|w| w[1] - w[0]));
        }
        if sp.is_empty() {
            return 1.0;
        }
        spacing_statistic(&sp, which)
    })
}

/// Uniform draw in `[0, 1)`, for the rescaled-uniform experiment.
pub fn uniform_t(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::unfold::{collect_point_process, UnfoldedSample};

    fn batch(values: Vec<Vec<f64>>) -> PointProcessBatch {
        let samples = values
            .into_iter()
            .enumerate()
            .map(|(r, v)| UnfoldedSample { e0: 0.0, half_width: 4.0, values: v, seed: 1, realization: r as u64 })
            .collect();
        collect_point_process(samples).unwrap()
    }

    #[test]
    fn tv_of_point_mass_at_zero() {
        let tv = tv_to_poisson(&[0; 700], 4.0);
        assert!((tv - (1.0 - (-4.0f64).exp())).abs() < 1e-12);
        let b = batch(vec![vec![]; 600]);
        let r = poisson_count_test(&b, -2.0, 2.0, 0.02).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn too_few_realizations() {
        let b = batch(vec![vec![]; 10]);
        assert!(poisson_count_test(&b, -2.0, 2.0, 0.02).is_err());
    }

    #[test]
    fn half_line_symmetric_and_one_sided() {
        let sym = batch(vec![vec![-1.0, 1.0]; 50]);
        let r = half_line_check(&sym, EdgeSide::Lower, 0.05, 0.01);
        assert_eq!(r.statistic, 0.5);
        assert!(!r.passed);
        let one = batch(vec![vec![-0.01, 0.5, 3.0]; 50]);
        assert!(half_line_check(&one, EdgeSide::Lower, 0.05, 0.01).passed);
    }

    #[test]
    fn chi_square_cells_cover_all_counts() {
        let mut counts: Vec<usize> = (0..300).map(|i| i % 9).collect();
        counts.push(40);
        let (stat, dof) = chi_square_poisson(&counts, 4.0);
        assert!(stat.is_finite() && dof >= 3);
        // eleven draws expect fewer than 5 per cell everywhere: one cell
        assert_eq!(chi_square_poisson(&counts[..11], 4.0).1, 0);
    }
}
