use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Outcome of one distributional test. `passed` iff `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub sample_size: usize,
    pub threshold: f64,
    pub passed: bool,
    /// Secondary numbers (chi-square, moments, ...), in insertion order.
    pub extras: Vec<(String, f64)>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, sample_size: usize, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            sample_size,
            threshold,
            passed: statistic <= threshold,
            extras: Vec::new(),
        }
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Self {
        self.extras.push((key.into(), value));
        self
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        format!(
            "{} {}: statistic={:.6} threshold={:.6} n={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.sample_size
        )
    }

    /// Flat `key = value` block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "name = {}", self.name).unwrap();
        writeln!(out, "statistic = {}", self.statistic).unwrap();
        writeln!(out, "sample_size = {}", self.sample_size).unwrap();
        writeln!(out, "threshold = {}", self.threshold).unwrap();
        writeln!(out, "passed = {}", self.passed).unwrap();
        for (k, v) in &self.extras {
            writeln!(out, "extra.{k} = {v}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse { path: "test report".into(), message: m };
        let mut name = None;
        let mut statistic = None;
        let mut sample_size = None;
        let mut threshold = None;
        let mut passed = None;
        let mut extras = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("line `{line}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("number `{v}`")));
            match k {
                "name" => name = Some(v.to_string()),
                "statistic" => statistic = Some(num(v)?),
                "sample_size" => sample_size = Some(v.parse().map_err(|_| bad(format!("size `{v}`")))?),
                "threshold" => threshold = Some(num(v)?),
                "passed" => passed = Some(v == "true"),
                _ => match k.strip_prefix("extra.") {
                    Some(key) => extras.push((key.to_string(), num(v)?)),
                    None => return Err(bad(format!("unknown key `{k}`"))),
                },
            }
        }
        let missing = |f: &str| bad(format!("missing {f}"));
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            statistic: statistic.ok_or_else(|| missing("statistic"))?,
            sample_size: sample_size.ok_or_else(|| missing("sample_size"))?,
            threshold: threshold.ok_or_else(|| missing("threshold"))?,
            passed: passed.ok_or_else(|| missing("passed"))?,
            extras,
        })
    }
}

/// How to calibrate a threshold by simulating the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSpec {
    pub replicates: usize,
    pub seed: u64,
    /// Quantile of the null statistic used as threshold.
    pub level: f64,
}

impl Default for NullSpec {
    fn default() -> Self {
        Self { replicates: 1000, seed: 0x6e756c6c, level: 0.99 }
    }
}

/// `level`-quantile of `statistic` over independent null replicates. Each
/// replicate owns RNG stream `r`, so the result does not depend on threads.
pub fn null_quantile<F>(spec: NullSpec, statistic: F) -> f64
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let mut values: Vec<f64> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(r);
            statistic(&mut rng)
        })
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
    empirical_quantile(&values, spec.level)
}

/// Order statistic at rank `ceil(q n)` of sorted `values`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and
/// a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Mean, variance (unbiased), skewness and excess kurtosis.
pub fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let var = if x.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    let (skew, kurt) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    (mean, var, skew, kurt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_against_own_ecdf_is_zero() {
        let s = [0.3, 0.1, 0.7, 0.7, 2.0];
        assert_eq!(ks_two_sample(&s, &s), 0.0);
    }

    #[test]
    fn ks_single_point() {
        // empirical CDF jumps 0 -> 1 at 0.25 against the uniform CDF
        assert!((ks_distance(&[0.25], |x| x.clamp(0.0, 1.0)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quantile_ranks() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.99), 99.0);
        assert_eq!(empirical_quantile(&v, 1.0), 100.0);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
    }

    #[test]
    fn report_round_trip() {
        let r = TestReport::new("tv", 0.01, 100, 0.02).with_extra("chi2", 3.5);
        assert!(r.passed);
        assert_eq!(TestReport::from_text(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn null_quantile_is_deterministic() {
        use rand::Rng;
        let spec = NullSpec { replicates: 64, seed: 3, level: 0.9 };
        let a = null_quantile(spec, |rng| rng.random::<f64>());
        let b = null_quantile(spec, |rng| rng.random::<f64>());
        assert_eq!(a, b);
    }
}
