use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Single-site law `μ` before coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderFamily {
    Uniform { min: f64, max: f64 },
    /// Piecewise-linear inverse CDF through `(u, x)` knots, `u` from 0 to 1.
    /// Repeated `u` values encode gaps in the support.
    Tabulated { knots: Vec<(f64, f64)> },
}

/// i.i.d. on-site potential `ω_x = λ · X_x`, `X_x ~ μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSpec {
    family: DisorderFamily,
    coupling: f64,
}

impl DisorderSpec {
    pub fn uniform(min: f64, max: f64, coupling: f64) -> Result<Self> {
        Self::new(DisorderFamily::Uniform { min, max }, coupling)
    }

    pub fn tabulated(knots: Vec<(f64, f64)>, coupling: f64) -> Result<Self> {
        Self::new(DisorderFamily::Tabulated { knots }, coupling)
    }

    /// Smoothed two-level law: mass `p` uniform on `[low, low + width]`,
    /// the rest uniform on `[high, high + width]`.
    pub fn two_level(p: f64, low: f64, high: f64, width: f64, coupling: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) || !(width > 0.0) || !(low + width < high) {
            return Err(Error::InvalidDisorder(format!(
                "two-level law needs 0 < p < 1, width > 0, low + width < high (p={p}, width={width})"
            )));
        }
        Self::tabulated(
            vec![(0.0, low), (p, low + width), (p, high), (1.0, high + width)],
            coupling,
        )
    }

    pub fn new(family: DisorderFamily, coupling: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidDisorder(format!("coupling must be positive, got {coupling}")));
        }
        match &family {
            DisorderFamily::Uniform { min, max } => {
                if !(min < max) || !min.is_finite() || !max.is_finite() {
                    return Err(Error::InvalidDisorder(format!("uniform needs min < max, got [{min}, {max}]")));
                }
            }
            DisorderFamily::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidDisorder("tabulated law needs at least two knots".into()));
                }
                if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
                    return Err(Error::InvalidDisorder("knot levels must run from 0 to 1".into()));
                }
                for w in knots.windows(2) {
                    let (u0, x0) = w[0];
                    let (u1, x1) = w[1];
                    if !(u1 >= u0 && x1 >= x0) || !x0.is_finite() || !x1.is_finite() {
                        return Err(Error::InvalidDisorder("knots must be nondecreasing".into()));
                    }
                    if u1 > u0 && x1 <= x0 {
                        return Err(Error::InvalidDisorder(format!(
                            "atom at {x0}: mass without width has unbounded density"
                        )));
                    }
                }
            }
        }
        Ok(Self { family, coupling })
    }

    pub fn family(&self) -> &DisorderFamily {
        &self.family
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Lower end of the support of `μ` (before coupling).
    pub fn support_min(&self) -> f64 {
        match &self.family {
            DisorderFamily::Uniform { min, .. } => *min,
            DisorderFamily::Tabulated { knots } => knots[0].1,
        }
    }

    pub fn support_max(&self) -> f64 {
        match &self.family {
            DisorderFamily::Uniform { max, .. } => *max,
            DisorderFamily::Tabulated { knots } => knots[knots.len() - 1].1,
        }
    }

    /// `‖g‖_∞` of the coupled potential `λX`.
    pub fn density_sup(&self) -> f64 {
        let raw = match &self.family {
            DisorderFamily::Uniform { min, max } => 1.0 / (max - min),
            DisorderFamily::Tabulated { knots } => knots
                .windows(2)
                .filter(|w| w[1].0 > w[0].0)
                .map(|w| (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
                .fold(0.0, f64::max),
        };
        raw / self.coupling
    }

    /// CDF of the coupled potential.
    pub fn cdf(&self, v: f64) -> f64 {
        let x = v / self.coupling;
        match &self.family {
            DisorderFamily::Uniform { min, max } => ((x - min) / (max - min)).clamp(0.0, 1.0),
            DisorderFamily::Tabulated { knots } => {
                if x < knots[0].1 {
                    return 0.0;
                }
                let mut u = 0.0;
                for w in knots.windows(2) {
                    let (u0, x0) = w[0];
                    let (u1, x1) = w[1];
                    if x >= x1 {
                        u = u1;
                    } else if x >= x0 && x1 > x0 {
                        u = u0 + (u1 - u0) * (x - x0) / (x1 - x0);
                        break;
                    } else {
                        break;
                    }
                }
                u
            }
        }
    }

    /// Inverse CDF of `μ` at level `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.family {
            DisorderFamily::Uniform { min, max } => min + (max - min) * u,
            DisorderFamily::Tabulated { knots } => {
                let i = knots.partition_point(|&(ui, _)| ui <= u).clamp(1, knots.len() - 1);
                let (u0, x0) = knots[i - 1];
                let (u1, x1) = knots[i];
                if u1 > u0 {
                    x0 + (x1 - x0) * (u - u0) / (u1 - u0)
                } else {
                    x1
                }
            }
        }
    }

    /// Disorder vector for one realization; a pure function of
    /// `(seed, realization, site)`. Each realization owns ChaCha stream
    /// `realization` of the experiment seed and consumes one draw per site
    /// in index order.
    pub fn sample(&self, seed: u64, realization: u64, sites: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization);
        (0..sites)
            .map(|_| self.coupling * self.quantile(rng.random::<f64>()))
            .collect()
    }

    pub fn describe(&self) -> String {
        match &self.family {
            DisorderFamily::Uniform { min, max } => {
                format!("uniform[{min:e},{max:e}]*{:e}", self.coupling)
            }
            DisorderFamily::Tabulated { knots } => {
                let k: Vec<String> = knots.iter().map(|(u, x)| format!("{u:e}:{x:e}")).collect();
                format!("tabulated[{}]*{:e}", k.join(","), self.coupling)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_sup_of_uniform() {
        let d = DisorderSpec::uniform(0.0, 1.0, 4.0).unwrap();
        assert_eq!(d.density_sup(), 0.25);
        let d = DisorderSpec::uniform(-0.5, 0.5, 8.0).unwrap();
        assert_eq!(d.density_sup(), 0.125);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(DisorderSpec::uniform(1.0, 1.0, 1.0).is_err());
        assert!(DisorderSpec::uniform(0.0, 1.0, 0.0).is_err());
        assert!(DisorderSpec::tabulated(vec![(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)], 1.0).is_err());
        assert!(DisorderSpec::tabulated(vec![(0.1, 0.0), (1.0, 1.0)], 1.0).is_err());
        assert!(DisorderSpec::two_level(1.2, 0.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = DisorderSpec::uniform(0.0, 1.0, 1.0).unwrap();
        assert_eq!(d.sample(7, 3, 100), d.sample(7, 3, 100));
        assert_ne!(d.sample(7, 3, 100), d.sample(7, 4, 100));
        // prefix property: site values do not depend on the volume
        assert_eq!(d.sample(7, 3, 10)[..], d.sample(7, 3, 100)[..10]);
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        let d = DisorderSpec::uniform(0.0, 1.0, 1.0).unwrap();
        let n = 1_000_000;
        let s = d.sample(11, 0, n);
        let mean = s.iter().sum::<f64>() / n as f64;
        let sigma = (1.0f64 / 12.0).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn tabulated_uniform_matches_uniform_law() {
        let tab = DisorderSpec::tabulated(vec![(0.0, 0.0), (0.3, 0.3), (1.0, 1.0)], 1.0).unwrap();
        let mut s = tab.sample(5, 0, 100_000);
        s.sort_by(|a, b| a.total_cmp(b));
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn two_level_law_has_gap() {
        let d = DisorderSpec::two_level(0.5, 0.0, 4.0, 0.01, 1.0).unwrap();
        assert_eq!(d.support_min(), 0.0);
        assert_eq!(d.support_max(), 4.01);
        assert!((d.density_sup() - 50.0).abs() < 1e-9);
        assert!((d.cdf(2.0) - 0.5).abs() < 1e-15);
        assert!((d.cdf(0.005) - 0.25).abs() < 1e-12);
        let s = d.sample(1, 0, 10_000);
        assert!(s.iter().all(|&x| (0.0..=0.01).contains(&x) || (4.0..=4.01).contains(&x)));
        let low = s.iter().filter(|&&x| x < 1.0).count() as f64 / 1e4;
        assert!((low - 0.5).abs() < 0.02);
    }
}
