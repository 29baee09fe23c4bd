use anderson_lab::eigen::{EigenPairs, SpectrumSample};
use anderson_lab::ids::{counting_grid, pool_counts, IdsTable, Route, SeedRanges};
use anderson_lab::lattice::{Boundary, DisorderSpec, HoppingKernel, LatticeGeometry, Model, Provenance};
use anderson_lab::reduction::{
    bernoulli_sample, decompose, local_batch, local_spectra, localization_centers, match_eigenvalues, reduction_batch, scales,
    CenterEstimate, LocalSpectra, LocalizationReport,
};
use anderson_lab::Error;
use proptest::prelude::*;

#[path = "common_oracles.rs"]
mod oracles;
use oracles::SplitMix;

fn localized() -> Model {
    Model::new(HoppingKernel::nearest_neighbor(1, 1.0).unwrap(), DisorderSpec::uniform(-0.5, 0.5, 8.0).unwrap())
}

fn pairs_from(vectors: Vec<Vec<f64>>, values: Vec<f64>, side: usize) -> EigenPairs<f64> {
    EigenPairs {
        spectrum: SpectrumSample {
            eigenvalues: values,
            geometry: LatticeGeometry::new(1, side).unwrap(),
            provenance: Provenance::default(),
            window: None,
        },
        vectors: vectors.concat(),
    }
}

/// Periodic sup-norm distance computed from raw coordinates.
fn brute_distance(g: &LatticeGeometry, x: usize, y: usize) -> usize {
    let l = g.side();
    g.coords(x)
        .iter()
        .zip(g.coords(y))
        .map(|(&a, b)| {
            let r = a.abs_diff(b);
            r.min(l - r)
        })
        .max()
        .unwrap()
}

#[test]
fn small_one_dimensional_decomposition() {
    let g = LatticeGeometry::new(1, 10).unwrap();
    let d = decompose(&g, 3, 2).unwrap();
    assert_eq!(d.origins, vec![vec![0], vec![5]]);
    assert_eq!(d.leftover_sites(), vec![3, 4, 8, 9]);
    assert_eq!(d.box_sites(1), vec![5, 6, 7]);
    assert!((d.leftover_fraction() - 0.4).abs() < 1e-15);
}

#[test]
fn pitch_equal_to_side_gives_one_box_per_axis() {
    let g = LatticeGeometry::new(2, 9).unwrap();
    let d = decompose(&g, 6, 3).unwrap();
    assert_eq!(d.origins, vec![vec![0, 0]]);
    assert_eq!(d.box_volume(), 36);
}

#[test]
fn infeasible_decomposition() {
    let g = LatticeGeometry::new(1, 10).unwrap();
    assert!(matches!(decompose(&g, 8, 3), Err(Error::Infeasible { side: 8, buffer: 3, length: 10 })));
    assert!(matches!(decompose(&g, 0, 3), Err(Error::InvalidGeometry(_))));
    assert!(matches!(decompose(&g, 3, 0), Err(Error::InvalidGeometry(_))));
}

#[test]
fn scale_defaults() {
    assert_eq!(scales(1000, 8.0, 3.0), (56, 21));
    assert_eq!(scales(1000, 8.0, 2.0), (56, 14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]
    #[test]
    fn decomposition_invariants(d in 1usize..=2, big in 4usize..24, side in 1usize..8, buffer in 1usize..6) {
        prop_assume!(side + buffer <= big);
        let g = LatticeGeometry::new(d, big).unwrap();
        let dec = decompose(&g, side, buffer).unwrap();
        let boxes: Vec<Vec<usize>> = (0..dec.len()).map(|j| dec.box_sites(j)).collect();
        let mut owner = vec![None; g.sites()];
        for (j, sites) in boxes.iter().enumerate() {
            prop_assert_eq!(sites.len(), dec.box_volume());
            for &x in sites {
                prop_assert!(owner[x].is_none(), "boxes overlap at {}", x);
                owner[x] = Some(j);
                prop_assert_eq!(dec.box_of(x), Some(j));
            }
        }
        for j in 0..boxes.len() {
            for k in j + 1..boxes.len() {
                let min = boxes[j].iter().flat_map(|&x| boxes[k].iter().map(move |&y| (x, y)))
                    .map(|(x, y)| brute_distance(&g, x, y)).min().unwrap();
                prop_assert!(min >= buffer, "boxes {} and {} at distance {}", j, k, min);
            }
        }
        let leftover = owner.iter().filter(|o| o.is_none()).count();
        prop_assert_eq!(leftover, dec.leftover_sites().len());
        prop_assert!((dec.leftover_fraction() - leftover as f64 / g.sites() as f64).abs() < 1e-12);
        if big % (side + buffer) == 0 {
            prop_assert!(dec.leftover_fraction() <= dec.leftover_bound() + 1e-12);
        }
    }
}

#[test]
fn basis_vector_is_a_point_mass() {
    let mut v = vec![0.0; 12];
    v[7] = 1.0;
    let r = localization_centers(&pairs_from(vec![v], vec![0.5], 12), (0.0, 1.0));
    assert_eq!(r.entries.len(), 1);
    assert_eq!(r.entries[0].center, 7);
    assert!(r.entries[0].point_mass);
    assert!(r.entries[0].fit.is_none());
}

#[test]
fn planted_exponential_decay() {
    let g = LatticeGeometry::new(1, 101).unwrap();
    let mut v: Vec<f64> = (0..101).map(|x| (-0.3 * g.distance(x, 37) as f64).exp()).collect();
    let norm = v.iter().map(|u| u * u).sum::<f64>().sqrt();
    v.iter_mut().for_each(|u| *u /= norm);
    let r = localization_centers(&pairs_from(vec![v], vec![0.0], 101), (-1.0, 1.0));
    let e = &r.entries[0];
    assert_eq!(e.center, 37);
    let fit = e.fit.unwrap();
    assert!((fit.xi - 0.3).abs() < 1e-3, "{fit:?}");
    assert!(fit.residual < 1e-9);
}

#[test]
fn ties_go_to_the_smallest_site_and_window_filters() {
    let a = vec![0.0, 0.6, 0.0, -0.6, 0.0, 0.529_150_262_212_918];
    let b = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let r = localization_centers(&pairs_from(vec![a, b], vec![0.2, 0.9], 6), (0.0, 0.5));
    assert_eq!(r.entries.len(), 1);
    assert_eq!(r.entries[0].center, 1);
    let empty = localization_centers(&pairs_from(vec![vec![1.0, 0.0]], vec![3.0], 2), (0.0, 1.0));
    assert!(empty.entries.is_empty());
}

#[test]
fn bulk_eigenvectors_of_localized_chain_decay() {
    let m = Model::new(HoppingKernel::nearest_neighbor(1, 1.0).unwrap(), DisorderSpec::uniform(-0.5, 0.5, 3.0).unwrap());
    let g = LatticeGeometry::new(1, 500).unwrap();
    let h = m.realize::<f64>(&g, 2, 0).unwrap();
    let pairs = anderson_lab::eigen::eigenpairs_in_interval(&h, -0.5, 0.5).unwrap();
    let r = localization_centers(&pairs, (-0.5, 0.5));
    assert!(r.entries.len() > 10);
    assert!(r.median_xi().unwrap() > 0.0);
    assert!(r.entries.iter().all(|e| e.fit.is_some_and(|f| f.residual.is_finite())));
    for e in &r.entries {
        let v = pairs.vector(e.index);
        assert!(v.iter().all(|u| u * u <= e.center_mass));
    }
}

#[test]
fn free_box_spectrum_is_circulant() {
    let g = LatticeGeometry::new(1, 30).unwrap();
    let d = decompose(&g, 8, 2).unwrap();
    let kernel = HoppingKernel::nearest_neighbor(1, 1.0).unwrap();
    let boxes = local_spectra(&kernel, &vec![0.0; 30], &d, (-0.5, 2.5), Boundary::Periodic).unwrap();
    let mut expect: Vec<f64> = (0..8).map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()).filter(|e| (-0.5..2.5).contains(e)).collect();
    expect.sort_by(f64::total_cmp);
    assert_eq!(boxes.len(), 3);
    for b in &boxes {
        assert_eq!(b.len(), expect.len());
        for (x, y) in b.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    let outside = local_spectra(&kernel, &vec![0.0; 30], &d, (2.5, 4.0), Boundary::Periodic).unwrap();
    assert!(outside.iter().all(|b| b.is_empty()));
}

#[test]
fn box_uses_parent_disorder_values() {
    // zero hopping: box eigenvalues are exactly the parent disorder values on its sites
    let g = LatticeGeometry::new(1, 12).unwrap();
    let d = decompose(&g, 4, 2).unwrap();
    let omega: Vec<f64> = (0..12).map(|x| x as f64 / 12.0).collect();
    let boxes = local_spectra(&HoppingKernel::on_site(1, 0.0).unwrap(), &omega, &d, (0.0, 1.0), Boundary::Open).unwrap();
    for (j, b) in boxes.iter().enumerate() {
        let want: Vec<f64> = d.box_sites(j).into_iter().map(|x| omega[x]).collect();
        assert_eq!(b, &want);
    }
}

fn center(center: usize, energy: f64) -> CenterEstimate {
    CenterEstimate { index: 0, energy, center, center_mass: 1.0, fit: None, point_mass: true }
}

#[test]
fn single_pair_and_leftover() {
    let g = LatticeGeometry::new(1, 10).unwrap();
    let d = decompose(&g, 3, 2).unwrap();
    let prov = Provenance { model_id: "m".into(), seed: 1, realization: 4 };
    let centers = LocalizationReport { provenance: prov.clone(), entries: vec![center(6, 0.25), center(9, 0.4)] };
    let locals = LocalSpectra { provenance: prov.clone(), boxes: vec![vec![], vec![0.26]] };
    let m = match_eigenvalues(&centers, &locals, &d).unwrap();
    assert_eq!(m.pairs.len(), 1);
    assert_eq!(m.pairs[0].box_index, 1);
    assert!((m.pairs[0].error - 0.01).abs() < 1e-15);
    assert_eq!((m.in_window, m.in_boxes, m.leftover_centers, m.unmatched), (2, 1, 1, 1));

    let other = LocalSpectra { provenance: Provenance { realization: 5, ..prov }, boxes: vec![vec![], vec![0.26]] };
    assert!(matches!(match_eigenvalues(&centers, &other, &d), Err(Error::RealizationMismatch(4, 5))));
}

#[test]
fn greedy_matching_is_injective() {
    let g = LatticeGeometry::new(1, 10).unwrap();
    let d = decompose(&g, 3, 2).unwrap();
    let prov = Provenance::default();
    let centers = LocalizationReport { provenance: prov.clone(), entries: vec![center(1, 0.5), center(2, 0.3), center(0, 0.7)] };
    let locals = LocalSpectra { provenance: prov, boxes: vec![vec![0.31, 0.32], vec![]] };
    let m = match_eigenvalues(&centers, &locals, &d).unwrap();
    // ascending global order: 0.3 takes 0.31, 0.5 takes 0.32, 0.7 finds nothing
    assert_eq!(m.pairs.iter().map(|p| (p.global, p.local)).collect::<Vec<_>>(), vec![(0.3, 0.31), (0.5, 0.32)]);
    assert_eq!(m.unmatched, 1);
    assert_eq!(m.multi_boxes, 1);
}

#[test]
fn localized_chain_matches_global_eigenvalues() {
    let g = LatticeGeometry::new(1, 1000).unwrap();
    let d = decompose(&g, 60, 20).unwrap();
    let (rep, centers) = reduction_batch(&localized(), &g, 11, 0..40, &d, (-0.1, 0.1), Boundary::Periodic).unwrap();
    let mut xs: Vec<f64> = centers.iter().flat_map(|c| c.entries.iter().filter_map(|e| e.fit.map(|f| f.xi))).collect();
    xs.sort_by(f64::total_cmp);
    let xi = xs[xs.len() / 2];
    let tol = 10.0 * (-xi * 20.0 / 2.0).exp();
    let in_boxes: usize = rep.realizations.iter().map(|r| r.in_boxes).sum();
    let good = rep.errors().iter().filter(|&&e| e < tol).count();
    assert!(good as f64 >= 0.9 * in_boxes as f64, "{good} of {in_boxes} below {tol}");
    for (r, c) in rep.realizations.iter().zip(&centers) {
        assert_eq!(r.provenance, c.provenance);
        for p in &r.pairs {
            assert_eq!(d.box_of(p.center), Some(p.box_index));
            assert!(p.error >= 0.0);
        }
    }
    let text = rep.to_text();
    assert!(text.starts_with("seed\trealization\tbox\tglobal\tlocal\terror\n"));
    assert!(text.contains(&format!("# matched = {}", rep.matched())));
}

fn synthetic_locals(values: impl Fn(usize) -> Vec<f64>, n: usize) -> Vec<LocalSpectra> {
    vec![LocalSpectra { provenance: Provenance::default(), boxes: (0..n).map(values).collect() }]
}

fn linear_table() -> IdsTable {
    let sites = 1u64 << 50;
    IdsTable::from_counts("m", Route::Counting, vec![0.0, 1.0], vec![0, sites], sites, 1, SeedRanges::single(9, 0..1)).unwrap()
}

#[test]
fn bernoulli_with_empty_interval_mass() {
    let t = linear_table();
    let r = bernoulli_sample(&synthetic_locals(|_| vec![], 10_000), (2.0, 3.0), 10, &t, &[0.5]).unwrap();
    assert_eq!(r.p_hat, 0.0);
    assert_eq!(r.hits, 0);
}

#[test]
fn bernoulli_of_deterministic_boxes_is_exact() {
    // N(I)|Λ_ℓ| = 0.005 · 10 = 0.05; every 20th box holds one eigenvalue
    let t = linear_table();
    let iv = (0.5, 0.505);
    let locals = synthetic_locals(|j| if j % 20 == 0 { vec![0.5 + 0.005 * ((j / 20) % 4) as f64 / 4.0 + 1e-4] } else { vec![] }, 20_000);
    let r = bernoulli_sample(&locals, iv, 10, &t, &[0.2, 0.4, 0.6, 0.8]).unwrap();
    assert_eq!(r.p_hat, 0.05);
    assert!((r.ratio - 1.0).abs() < 1e-9);
    assert!(r.confidence.0 < 0.05 && 0.05 < r.confidence.1);
    assert!(r.positions.iter().all(|&x| (0.0..=1.0).contains(&x)));
    // boxes with two eigenvalues are not hits
    let doubled = synthetic_locals(|j| if j % 20 == 0 { vec![0.501, 0.502] } else { vec![] }, 20_000);
    assert_eq!(bernoulli_sample(&doubled, iv, 10, &t, &[0.5]).unwrap().hits, 0);
}

#[test]
fn bernoulli_estimator_converges_to_p() {
    let t = linear_table();
    let mut rng = SplitMix(5);
    let p = 0.04;
    let draws: Vec<bool> = (0..40_000).map(|_| rng.uniform() < p).collect();
    let locals = synthetic_locals(|j| if draws[j] { vec![0.5 + 0.004 * rng_pos(j)] } else { vec![] }, 40_000);
    let r = bernoulli_sample(&locals, (0.5, 0.504), 10, &t, &[0.25, 0.5, 0.75]).unwrap();
    assert!((r.p_hat - p).abs() < 4.0 * r.standard_error, "{} vs {p}", r.p_hat);
    assert!(r.increments.iter().all(|i| i.passed), "{:?}", r.increments);
}

fn rng_pos(j: usize) -> f64 {
    SplitMix(j as u64 + 100).uniform()
}

#[test]
fn bernoulli_preconditions() {
    let t = linear_table();
    let few = synthetic_locals(|_| vec![], 500);
    assert!(matches!(bernoulli_sample(&few, (0.5, 0.501), 10, &t, &[0.5]), Err(Error::TooFewRealizations { .. })));
    let many = synthetic_locals(|_| vec![], 10_000);
    assert!(matches!(bernoulli_sample(&many, (0.2, 0.4), 10, &t, &[0.5]), Err(Error::Precondition(_))));
    assert!(matches!(bernoulli_sample(&many, (0.5, 0.501), 10, &t, &[1.5]), Err(Error::Precondition(_))));
}

#[test]
fn localized_boxes_follow_the_density_of_states() {
    let m = localized();
    let box_side = 50;
    // bulk interval around 0 with N(I)|Λ_ℓ| ≈ 0.05
    let big = LatticeGeometry::new(1, 20_000).unwrap();
    let grid = counting_grid(-0.05, 0.05, 201, &[]);
    let table = pool_counts(&m, &big, 70, 0..300, grid).unwrap();
    let mass_per = table.interval_mass(-0.05, 0.05).unwrap() / 0.1;
    let half = 0.05 / box_side as f64 / mass_per / 2.0;
    let iv = (-half, half);
    let g = LatticeGeometry::new(1, 1000).unwrap();
    let d = decompose(&g, box_side, 16).unwrap();
    let locals = local_batch(&m, &g, 71, 0..(10_000 / d.len() as u64 + 1), &d, iv, Boundary::Periodic).unwrap();
    let r = bernoulli_sample(&locals, iv, d.box_volume(), &table, &[0.25, 0.5, 0.75]).unwrap();
    assert!((r.expected - 0.05).abs() < 0.005, "{}", r.expected);
    assert!((0.9..=1.1).contains(&r.ratio), "ratio {} ({} hits of {})", r.ratio, r.hits, r.samples);
}
