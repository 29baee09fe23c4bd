use anderson_lab::eigen::{eigenvalues_symmetric, SpectrumSample};
use anderson_lab::ids::{counting_grid, pool_counts, pool_spectra, Anchor, IdsBuilder, IdsTable, Route, SeedRanges};
use anderson_lab::lattice::{DisorderSpec, HoppingKernel, LatticeGeometry, Model, Provenance};
use proptest::prelude::*;

#[path = "common_oracles.rs"]
mod oracles;
use oracles::SplitMix;

fn hand_sample(model_id: &str, values: &[f64], realization: u64) -> SpectrumSample<f64> {
    SpectrumSample {
        eigenvalues: values.to_vec(),
        geometry: LatticeGeometry::new(1, values.len()).unwrap(),
        provenance: Provenance { model_id: model_id.into(), seed: 1, realization },
        window: None,
    }
}

fn zero_hopping_uniform() -> Model {
    Model::new(HoppingKernel::on_site(1, 0.0).unwrap(), DisorderSpec::uniform(0.0, 1.0, 1.0).unwrap())
}

fn anderson() -> Model {
    Model::new(HoppingKernel::nearest_neighbor(1, 1.0).unwrap(), DisorderSpec::uniform(-0.5, 0.5, 4.0).unwrap())
}

#[test]
fn single_sample_table() {
    let t = IdsTable::new("m").accumulate(&hand_sample("m", &[1.0, 2.0, 3.0], 0)).unwrap();
    assert_eq!(t.evaluate(0.0).unwrap(), 0.0);
    assert_eq!(t.evaluate(1.0).unwrap(), 1.0 / 3.0);
    assert_eq!(t.evaluate(2.0).unwrap(), 2.0 / 3.0);
    // linear between the knots 2 and 3
    assert!((t.evaluate(2.5).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(t.evaluate(3.0).unwrap(), 1.0);
    assert_eq!(t.pooled_sites(), 3);
}

#[test]
fn pooling_identical_sample_twice_keeps_fractions() {
    let s = hand_sample("m", &[0.5, 1.5, 1.5, 4.0], 0);
    let once = IdsTable::new("m").accumulate(&s).unwrap();
    let twice = once.clone().accumulate(&s).unwrap();
    assert_eq!(once.knots(), twice.knots());
    assert_eq!(once.fractions(), twice.fractions());
    assert_eq!(twice.pooled_sites(), 8);
}

#[test]
fn rejects_foreign_and_partial_samples() {
    assert!(IdsTable::new("m").accumulate(&hand_sample("other", &[1.0], 0)).is_err());
    let mut partial = hand_sample("m", &[1.0], 0);
    partial.window = Some(anderson_lab::eigen::SpectralWindow { lo: 0.0, hi: 2.0, below: 0 });
    assert!(IdsTable::new("m").accumulate(&partial).is_err());
}

#[test]
fn zero_hopping_matches_uniform_cdf() {
    let model = zero_hopping_uniform();
    let t = pool_spectra(&model, &LatticeGeometry::new(1, 100).unwrap(), 9, 0..100).unwrap();
    assert_eq!(t.pooled_sites(), 10_000);
    let mut worst: f64 = 0.0;
    for &k in t.knots() {
        // the empirical CDF jumps at knots: compare both sides
        let below = t.cumulative_count_at(k - 1e-12) as f64 / 1e4;
        worst = worst.max((t.evaluate(k).unwrap() - k).abs()).max((below - k).abs());
    }
    assert!(worst < 0.03, "{worst}");
    let mass = t.interval_mass(0.25, 0.75).unwrap();
    assert!((mass - 0.5).abs() < 0.03);
    let (lo, hi) = t.interval_for_mass(Anchor::Interior(0.5), 0.1 * 100.0, 100).unwrap();
    assert!((lo - 0.45).abs() < 0.02 && (hi - 0.55).abs() < 0.02, "{lo} {hi}");
    assert!((t.interval_mass(lo, hi).unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn interpolation_midpoint() {
    let t = IdsTable::from_counts("m", Route::Counting, vec![1.0, 2.0], vec![1, 2], 5, 1, SeedRanges::new()).unwrap();
    assert!((t.evaluate(1.5).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn evaluate_equals_recount_at_knots() {
    let model = anderson();
    let g = LatticeGeometry::new(1, 40).unwrap();
    let spectra: Vec<Vec<f64>> = (0..25)
        .map(|r| eigenvalues_symmetric(&model.realize::<f64>(&g, 3, r).unwrap()).unwrap().eigenvalues)
        .collect();
    let t = pool_spectra(&model, &g, 3, 0..25).unwrap();
    let mut rng = SplitMix(5);
    for _ in 0..200 {
        let k = t.knots()[(rng.next_u64() % t.knots().len() as u64) as usize];
        let direct = spectra.iter().flatten().filter(|&&v| v <= k).count() as f64 / 1000.0;
        assert_eq!(t.evaluate(k).unwrap(), direct);
    }
}

#[test]
fn interval_mass_edge_cases() {
    let t = pool_spectra(&anderson(), &LatticeGeometry::new(1, 30).unwrap(), 1, 0..10).unwrap();
    assert_eq!(t.interval_mass(0.3, 0.3).unwrap(), 0.0);
    assert_eq!(t.interval_mass(-100.0, 100.0).unwrap(), 1.0);
    assert!(t.interval_mass(1.0, 0.0).is_err());
}

#[test]
fn quantile_round_trip_and_ends() {
    let t = pool_spectra(&anderson(), &LatticeGeometry::new(1, 50).unwrap(), 2, 0..40).unwrap();
    assert_eq!(t.quantile(0.0).unwrap(), t.knots()[0]);
    assert_eq!(t.quantile(1.0).unwrap(), *t.knots().last().unwrap());
    let mut rng = SplitMix(8);
    for _ in 0..100 {
        let q = rng.uniform();
        let e = t.quantile(q).unwrap();
        assert!((t.evaluate(e).unwrap() - q).abs() < 1e-12);
    }
    assert!(t.quantile(1.5).is_err());
    assert!(t.quantile(-0.1).is_err());
}

#[test]
fn interval_for_mass_edges() {
    let t = pool_spectra(&anderson(), &LatticeGeometry::new(1, 50).unwrap(), 2, 0..40).unwrap();
    let edge = t.knots()[0] - 0.1;
    let (a, b) = t.interval_for_mass(Anchor::LowerEdge(edge), 0.05 * 50.0, 50).unwrap();
    assert_eq!(a, edge);
    assert_eq!(b, t.quantile(0.05).unwrap());
    assert_eq!(t.interval_for_mass(Anchor::Interior(0.2), 0.0, 50).unwrap(), (0.2, 0.2));
    assert!(t.interval_for_mass(Anchor::Interior(t.knots()[3]), 10.0, 50).is_err());
    assert!(t.interval_for_mass(Anchor::LowerEdge(edge), 60.0, 50).is_err());
}

fn synthetic(law: impl Fn(f64) -> f64, offsets: &[f64]) -> IdsTable {
    let sites: u64 = 1_000_000_000_000_000;
    let mut knots = vec![0.0];
    let mut counts = vec![0];
    let mut sorted = offsets.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for a in sorted {
        knots.push(a);
        counts.push((law(a) * sites as f64).round() as u64);
    }
    knots.push(10.0);
    counts.push(sites);
    IdsTable::from_counts("synthetic", Route::Counting, knots, counts, sites, 1, SeedRanges::new()).unwrap()
}

#[test]
fn lifshitz_fit_recovers_planted_exponents() {
    let offsets: Vec<f64> = (0..6).map(|j| 0.8 * 0.5f64.powi(j)).collect();
    let t = synthetic(|a| (-a.powf(-0.5)).exp(), &offsets);
    let fit = t.lifshitz_exponent_fit(0.0, &offsets).unwrap();
    assert!((fit.rho - 0.5).abs() < 1e-6, "{}", fit.rho);
    assert!(fit.residual_norm < 1e-6);

    let offsets: Vec<f64> = (0..4).map(|j| 0.8 * 0.5f64.powi(j)).collect();
    let t = synthetic(|a| (-1.0 / a).exp(), &offsets);
    let fit = t.lifshitz_exponent_fit(0.0, &offsets).unwrap();
    assert!((fit.rho - 1.0).abs() < 1e-6, "{}", fit.rho);
}

#[test]
fn lifshitz_fit_skips_empty_offsets() {
    // exp(-1/0.02) rounds to zero counts, so N vanishes on [0, 0.02]
    let offsets = [0.8, 0.4, 0.2, 0.1, 0.02];
    let t = synthetic(|a| (-1.0 / a).exp(), &offsets);
    let fit = t.lifshitz_exponent_fit(0.0, &[0.8, 0.4, 0.2, 0.1, 0.01]).unwrap();
    assert_eq!(fit.skipped, vec![0.01]);
    assert_eq!(fit.used.len(), 4);
    assert!(t.lifshitz_exponent_fit(0.0, &[0.8, 0.01, 0.015]).is_err());
}

#[test]
fn counting_route_agrees_with_spectrum_route() {
    let model = anderson();
    let g = LatticeGeometry::new(1, 64).unwrap();
    let spectral = pool_spectra(&model, &g, 4, 0..30).unwrap();
    let grid = counting_grid(-4.5, 4.5, 97, &[(-0.2, 0.2, 33)]);
    let counted = pool_counts(&model, &g, 4, 0..30, grid).unwrap();
    assert_eq!(counted.pooled_sites(), spectral.pooled_sites());
    assert_eq!(counted.provenance(), spectral.provenance());
    for (&e, &c) in counted.knots().iter().zip(counted.counts()) {
        assert_eq!(spectral.cumulative_count_at(e), c, "energy {e}");
    }
    assert!(spectral.merge(&counted).is_err());
}

#[test]
fn text_round_trip_is_bit_exact() {
    let model = anderson();
    let g = LatticeGeometry::new(1, 30).unwrap();
    for t in [
        pool_spectra(&model, &g, 6, 0..7).unwrap(),
        pool_counts(&model, &g, 6, 0..7, counting_grid(-4.0, 4.0, 50, &[])).unwrap(),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ids.tsv");
        t.write(&path).unwrap();
        let back = IdsTable::read(&path).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.knots().iter().zip(t.knots()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    assert!(IdsTable::from_text("model_id\tx\nroute\tspectrum\n", "mem").is_err());
}

fn table_of(values: &[Vec<f64>]) -> IdsTable {
    let mut b = IdsBuilder::new("p");
    for (r, v) in values.iter().enumerate() {
        let mut v = v.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        b.add(&hand_sample("p", &v, r as u64)).unwrap();
    }
    b.finish()
}

proptest! {
    #[test]
    fn accumulate_keeps_invariants(samples in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..12), 1..8)) {
        let mut t = IdsTable::new("p");
        for (r, v) in samples.iter().enumerate() {
            let mut v = v.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            t = t.accumulate(&hand_sample("p", &v, r as u64)).unwrap();
            let f = t.fractions();
            prop_assert!(f.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert_eq!(*f.last().unwrap(), 1.0);
        }
        let total: usize = samples.iter().map(Vec::len).sum();
        prop_assert_eq!(t.pooled_sites(), total as u64);
        prop_assert_eq!(&t, &table_of(&samples));
    }

    #[test]
    fn pooling_is_order_independent(samples in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..12), 2..6)) {
        let forward = table_of(&samples);
        let parts: Vec<IdsTable> = samples.iter().enumerate().map(|(r, v)| {
            let mut v = v.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            IdsTable::new("p").accumulate(&hand_sample("p", &v, r as u64)).unwrap()
        }).collect();
        let mut backward = IdsTable::new("p");
        for p in parts.iter().rev() {
            backward = backward.merge(p).unwrap();
        }
        prop_assert_eq!(forward.knots(), backward.knots());
        prop_assert_eq!(forward.counts(), backward.counts());
    }

    #[test]
    fn interval_mass_is_additive(values in prop::collection::vec(-5.0f64..5.0, 3..40), mut cut in prop::collection::vec(-6.0f64..6.0, 3)) {
        let t = table_of(&[values]);
        cut.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let whole = t.interval_mass(cut[0], cut[2]).unwrap();
        let parts = t.interval_mass(cut[0], cut[1]).unwrap() + t.interval_mass(cut[1], cut[2]).unwrap();
        prop_assert!((whole - parts).abs() <= 4.0 * f64::EPSILON);
    }
}
