use anderson_lab::eigen::{eigenvalues_symmetric, SpectrumSample};
use anderson_lab::ids::{pool_spectra, IdsTable, Route, SeedRanges};
use anderson_lab::lattice::{DisorderSpec, HoppingKernel, LatticeGeometry, Model, Provenance};
use anderson_lab::stats::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

fn linear_table(volume: u64) -> IdsTable {
    // N(E) = E on [0, 1]
    let knots = vec![0.0, 1.0];
    IdsTable::from_counts("lin", Route::Counting, knots, vec![0, volume], volume, 1, SeedRanges::single(0, 0..1)).unwrap()
}

fn sample(model_id: &str, values: Vec<f64>, sites: usize, realization: u64) -> SpectrumSample<f64> {
    SpectrumSample {
        eigenvalues: values,
        geometry: LatticeGeometry::new(1, sites).unwrap(),
        provenance: Provenance { model_id: model_id.into(), seed: 1, realization },
        window: None,
    }
}

fn anderson() -> Model {
    Model::new(HoppingKernel::nearest_neighbor(1, 1.0).unwrap(), DisorderSpec::uniform(-0.5, 0.5, 6.0).unwrap())
}

fn poisson_batch(realizations: usize, half_width: f64, seed: u64) -> PointProcessBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..realizations)
        .map(|r| UnfoldedSample {
            e0: 0.0,
            half_width,
            values: poisson_process(&mut rng, -half_width, half_width),
            seed,
            realization: r as u64,
        })
        .collect();
    collect_point_process(samples).unwrap()
}

#[test]
fn unfold_examples() {
    let t = linear_table(100);
    let s = sample("lin", vec![0.2, 0.5, 0.51, 0.9], 100, 1);
    let u = unfold(&s, &t, 0.5, 3.0).unwrap();
    assert_eq!(u.values.len(), 2);
    assert_eq!(u.values[0], 0.0);
    assert!((u.values[1] - 1.0).abs() < 1e-12);
    assert!(unfold(&s, &t, 1.5, 3.0).is_err());
    let overlapping = SpectrumSample { provenance: Provenance { seed: 0, realization: 0, ..s.provenance.clone() }, ..s.clone() };
    assert!(matches!(unfold(&overlapping, &t, 0.5, 3.0), Err(anderson_lab::Error::ProvenanceOverlap { .. })));
}

#[test]
fn unfold_matches_direct_evaluation() {
    let model = anderson();
    let g = LatticeGeometry::new(1, 80).unwrap();
    let table = pool_spectra(&model, &g, 10, 0..60).unwrap();
    for r in 0..10 {
        let s = eigenvalues_symmetric(&model.realize::<f64>(&g, 11, r).unwrap()).unwrap();
        let e0 = 0.3;
        let u = unfold(&s, &table, e0, 6.0).unwrap();
        let n0 = table.evaluate(e0).unwrap();
        let direct: Vec<f64> = s
            .eigenvalues
            .iter()
            .map(|&e| 80.0 * (table.evaluate(e).unwrap() - n0))
            .filter(|x| x.abs() <= 6.0)
            .collect();
        assert_eq!(u.values, direct);
        assert!(u.values.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn windowed_sample_must_cover_unfolded_range() {
    let model = anderson();
    let g = LatticeGeometry::new(1, 80).unwrap();
    let table = pool_spectra(&model, &g, 10, 0..60).unwrap();
    let h = model.realize::<f64>(&g, 11, 0).unwrap();
    let narrow = anderson_lab::eigen::eigenvalues_in_interval(&h, 0.2, 0.4).unwrap();
    assert!(unfold(&narrow, &table, 0.3, 20.0).is_err());
    let wide = anderson_lab::eigen::eigenvalues_in_interval(&h, -3.0, 3.0).unwrap();
    let full = eigenvalues_symmetric(&h).unwrap();
    let (a, b) = (unfold(&wide, &table, 0.3, 6.0).unwrap(), unfold(&full, &table, 0.3, 6.0).unwrap());
    assert_eq!(a.values.len(), b.values.len());
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn batch_assembly() {
    assert!(collect_point_process(vec![]).is_err());
    let one = poisson_batch(1, 4.0, 1);
    assert_eq!(one.len(), 1);
    let a = poisson_batch(3, 4.0, 1);
    let b = poisson_batch(2, 4.0, 2);
    let joined = a.clone().merge(b.clone()).unwrap();
    assert_eq!(joined.samples[..3], a.samples[..]);
    assert_eq!(joined.samples[3..], b.samples[..]);
    assert!(a.clone().merge(a.clone()).is_err());
    let other_window = poisson_batch(2, 5.0, 3);
    assert!(a.merge(other_window).is_err());
}

#[test]
fn rescaled_uniform_examples() {
    let t = linear_table(4);
    let s = sample("lin", vec![0.25, 0.5, 0.75], 4, 1);
    let atoms = rescaled_uniform_process(&s, &t, 0.0, 1.0, 0.5).unwrap();
    assert_eq!(atoms, vec![-1.0, 0.0, 1.0]);
    let at = rescaled_uniform_process(&s, &t, 0.0, 1.0, 0.25).unwrap();
    assert_eq!(at[0], 0.0);
    let flat = IdsTable::from_counts("lin", Route::Counting, vec![0.0, 1.0, 2.0], vec![0, 4, 4], 4, 1, SeedRanges::single(0, 0..1)).unwrap();
    assert!(rescaled_uniform_process(&s, &flat, 1.2, 1.8, 0.5).is_err());
}

#[test]
fn spacing_examples() {
    let t = linear_table(100);
    let s = sample("lin", vec![0.1, 0.3, 0.32, 0.32, 0.9], 100, 1);
    let r = spacings(&s, &t, 0.2, 0.5).unwrap();
    assert_eq!(r.eigenvalues_in_window, 3);
    assert_eq!(r.spacings.len(), 2);
    assert!((r.spacings[0] - 2.0).abs() < 1e-12);
    assert_eq!(r.spacings[1], 0.0);
    assert!(spacings(&s, &t, 0.5, 0.5).is_err());

    let model = anderson();
    let g = LatticeGeometry::new(1, 80).unwrap();
    let table = pool_spectra(&model, &g, 10, 0..60).unwrap();
    let s = eigenvalues_symmetric(&model.realize::<f64>(&g, 12, 0).unwrap()).unwrap();
    let r = spacings(&s, &table, -1.0, 1.0).unwrap();
    let ns: Vec<f64> = s.in_interval(-1.0, 1.0).iter().map(|&e| 80.0 * table.evaluate(e).unwrap()).collect();
    let direct: Vec<f64> = ns.windows(2).map(|w| w[1] - w[0]).collect();
    assert_eq!(r.spacings, direct);
}

#[test]
fn dls_examples() {
    let single = SpacingsReport { spacings: vec![0.7], eigenvalues_in_window: 2, realizations: 1 };
    let c = dls(&single).unwrap();
    assert_eq!((c.at(0.0), c.at(0.7), c.at(0.71)), (1.0, 1.0, 0.0));
    let zeros = SpacingsReport { spacings: vec![0.0; 5], eigenvalues_in_window: 6, realizations: 1 };
    assert_eq!(dls(&zeros).unwrap().sup_distance, 1.0);
    assert!(dls(&SpacingsReport::default()).is_err());
}

#[test]
fn dls_null_for_iid_exponential() {
    let q99 = null_quantile(NullSpec { replicates: 300, seed: 5, level: 0.99 }, |rng| {
        let x: Vec<f64> = (0..10_000).map(|_| Exp1.sample(rng)).collect();
        spacing_statistic(&x, SpacingStatistic::Dls)
    });
    assert!(q99 < 0.02, "{q99}");
}

#[test]
fn poisson_count_null() {
    let thr = tv_null_threshold(4.0, 10_000, NullSpec { replicates: 400, seed: 9, level: 0.99 });
    assert!(thr < 0.02, "{thr}");
    let batch = poisson_batch(10_000, 4.0, 21);
    let r = poisson_count_test(&batch, -2.0, 2.0, thr).unwrap();
    assert!(r.statistic < 0.03);
    let rho = count_correlation(&batch, (-4.0, -1.0), (0.0, 3.0));
    assert!(rho.abs() < 0.05, "{rho}");
}

#[test]
fn tv_is_invariant_under_relabeling() {
    let mut batch = poisson_batch(800, 4.0, 3);
    let before = poisson_count_test(&batch, -2.0, 2.0, 1.0).unwrap().statistic;
    batch.samples.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let after = poisson_count_test(&batch, -2.0, 2.0, 1.0).unwrap().statistic;
    assert_eq!(before, after);
}

#[test]
fn half_line_examples() {
    let lower: Vec<UnfoldedSample> = (0..20)
        .map(|r| UnfoldedSample { e0: -2.0, half_width: 4.0, values: vec![-0.03, 0.5, 2.0], seed: 1, realization: r })
        .collect();
    assert!(half_line_check(&collect_point_process(lower).unwrap(), EdgeSide::Lower, 0.05, 0.01).passed);
    let sym = poisson_batch(2000, 4.0, 4);
    let r = half_line_check(&sym, EdgeSide::Lower, 0.05, 0.01);
    assert!(!r.passed);
    assert!((r.statistic - 0.5).abs() < 0.02);
}

fn poisson_counts(mean: f64, n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = Poisson::new(mean).unwrap();
    (0..n).map(|_| law.sample(&mut rng) as u64).collect()
}

#[test]
fn clt_examples() {
    let r = CountReport::new(poisson_counts(100.0, 10_000, 1), 100.0).unwrap();
    let c = clt_report(&r, 0.05, 0.15).unwrap();
    // integer counts leave a lattice floor of about 0.027 in the plain distance
    assert!(c.ks.statistic < 0.05, "{}", c.ks.statistic);
    assert!(c.ks_continuity_corrected < 0.03, "{}", c.ks_continuity_corrected);
    assert!(c.passed());
    assert!(!c.low_mean);

    let r4 = CountReport::new(poisson_counts(4.0, 10_000, 2), 4.0).unwrap();
    let c4 = clt_report(&r4, 0.05, 0.15).unwrap();
    assert!((c4.skewness.statistic - 0.5).abs() < 0.1);
    assert!(!c4.skewness.passed && c4.low_mean);
}

#[test]
fn deviation_examples() {
    let r = CountReport::new(poisson_counts(100.0, 10_000, 3), 100.0).unwrap();
    let gammas: Vec<f64> = (0..9).map(|k| 0.55 + 0.05 * k as f64).collect();
    let rows = deviation_report(&r, &gammas).unwrap();
    assert!(decays_monotonically(&rows));
    assert!(rows[0].1 > rows[8].1);
    let near_one = deviation_report(&r, &[0.999]).unwrap();
    assert!(near_one[0].1 < 1e-3);
}

#[test]
fn ks_self_distance_is_zero() {
    let x: Vec<f64> = poisson_counts(7.0, 500, 4).into_iter().map(|c| c as f64).collect();
    assert_eq!(ks_two_sample(&x, &x), 0.0);
}

#[test]
fn batch_and_report_files_round_trip() {
    let batch = poisson_batch(25, 4.0, 6);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("batch.tsv");
    write_batch(&batch, &p).unwrap();
    assert_eq!(read_batch(&p).unwrap(), batch);
    let report = poisson_count_test(&poisson_batch(600, 4.0, 7), -2.0, 2.0, 0.05).unwrap();
    assert_eq!(TestReport::from_text(&report.to_text()).unwrap(), report);
}
