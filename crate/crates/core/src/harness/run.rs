//! Experiment slices, report files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::eigen::{eigenvalues_in_interval, SpectrumSample};
use crate::error::{Error, Result};
use crate::estimates::{
    high_order_moment, minami_estimate, wcontrol_decay, wegner_estimate, BoundConstants, CountBatch, WcontrolReport,
};
use crate::ids::{counting_grid, pool_counts, pool_spectra, Anchor, IdsTable, Route};
use crate::lattice::{LatticeGeometry, Model};
use crate::reduction::{bernoulli_sample, decompose, local_batch, reduction_batch, scales};
use crate::stats::{
    batch_to_text, clt_report, collect_point_process, decays_monotonically, deviation_report, dls, half_line_check,
    poisson_count_test, spacing_null_threshold, spacing_statistic, spacings, tv_null_threshold, unfold, CountReport,
    EdgeSide, NullSpec, PointProcessBatch, SpacingStatistic, SpacingsReport, TestReport,
};

pub const TABLE_FILE: &str = "ids_table.tsv";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// `|intensity - 1|` allowed for the unfolded bulk process.
pub const INTENSITY_TOLERANCE: f64 = 0.05;
pub const HALF_LINE_MARGIN: f64 = 0.05;
pub const HALF_LINE_THRESHOLD: f64 = 0.01;
/// `|mean count / (N(I)|Λ|) - 1|` allowed in the enhanced Wegner check.
pub const WEGNER_RATIO_TOLERANCE: f64 = 0.1;
/// Standard errors allowed for saturation and finite-volume discrepancies.
pub const SE_MULTIPLE: f64 = 2.0;
pub const LIFSHITZ_TARGET: f64 = 0.5;
pub const LIFSHITZ_TOLERANCE: f64 = 0.15;
pub const CLT_KS_THRESHOLD: f64 = 0.05;
pub const CLT_SKEW_THRESHOLD: f64 = 0.15;
pub const MATCHED_FRACTION: f64 = 0.9;
pub const BOX_RATIO_TOLERANCE: f64 = 0.1;
/// Unfolded margin added to spectral windows beyond the analysed range.
const WINDOW_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    IdsBuild,
    BulkStats,
    EdgeStats,
    WegnerMinami,
    Reduce,
    Clt,
    Spacings,
}

impl Slice {
    pub const ALL: [Slice; 7] =
        [Slice::IdsBuild, Slice::BulkStats, Slice::EdgeStats, Slice::WegnerMinami, Slice::Reduce, Slice::Clt, Slice::Spacings];

    pub fn name(&self) -> &'static str {
        match self {
            Slice::IdsBuild => "ids-build",
            Slice::BulkStats => "bulk-stats",
            Slice::EdgeStats => "edge-stats",
            Slice::WegnerMinami => "wegner-minami",
            Slice::Reduce => "reduce",
            Slice::Clt => "clt",
            Slice::Spacings => "spacings",
        }
    }

    fn stem(&self) -> String {
        self.name().replace('-', "_")
    }
}

/// Configuration hash, timings and checksums of every file a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub threads: usize,
    pub timings: Vec<(String, f64)>,
    /// `(file name, sha256)` relative to the output directory.
    pub files: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "config_sha256 = {}", self.config_hash).unwrap();
        writeln!(out, "tool_version = {}", self.tool_version).unwrap();
        writeln!(out, "threads = {}", self.threads).unwrap();
        for (phase, secs) in &self.timings {
            writeln!(out, "phase {phase} seconds = {secs:.3}").unwrap();
        }
        for (name, sum) in &self.files {
            writeln!(out, "file {name} sha256 = {sum}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        let mut m = RunManifest { config_hash: String::new(), tool_version: String::new(), threads: 0, timings: Vec::new(), files: Vec::new() };
        for line in text.lines() {
            let Some((key, value)) = line.split_once(" = ") else { continue };
            let mut words = key.split_whitespace();
            match (words.next(), words.next(), words.next()) {
                (Some("config_sha256"), None, _) => m.config_hash = value.to_string(),
                (Some("tool_version"), None, _) => m.tool_version = value.to_string(),
                (Some("threads"), None, _) => m.threads = value.parse().unwrap_or(0),
                (Some("phase"), Some(p), Some("seconds")) => m.timings.push((p.to_string(), value.parse().unwrap_or(f64::NAN))),
                (Some("file"), Some(f), Some("sha256")) => m.files.push((f.to_string(), value.to_string())),
                _ => {}
            }
        }
        m
    }

    /// Keeps entries of an earlier run under the same config whose files are unchanged on disk.
    fn carry_over(&mut self, earlier: &RunManifest, dir: &Path) {
        if earlier.config_hash != self.config_hash {
            return;
        }
        for (name, sum) in &earlier.files {
            if self.files.iter().any(|(n, _)| n == name) {
                continue;
            }
            if fs::read(dir.join(name)).is_ok_and(|b| &sha256_hex(&b) == sum) {
                self.files.push((name.clone(), sum.clone()));
            }
        }
        for (phase, secs) in &earlier.timings {
            if !self.timings.iter().any(|(p, _)| p == phase) {
                self.timings.push((phase.clone(), *secs));
            }
        }
        self.files.sort();
    }

    /// Every listed file exists under `dir` with its recorded checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, sum) in &self.files {
            let path = dir.join(name);
            let bytes = fs::read(&path)?;
            if &sha256_hex(&bytes) != sum {
                return Err(Error::Parse { path: path.display().to_string(), message: "checksum differs from manifest".into() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub reports: Vec<TestReport>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn report(&self, name: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<(String, String)>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(name), text)?;
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), sha256_hex(text.as_bytes())));
        Ok(())
    }
}

fn reports_text(reports: &[TestReport]) -> String {
    reports.iter().map(|r| r.to_text()).collect::<Vec<_>>().join("\n")
}

/// Runs `slices` in order, writing into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, slices: &[Slice], out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config { field: "threads".into(), message: e.to_string() })?;
    let ctx = Context::new(cfg)?;
    let mut writer = Writer { dir: out, files: Vec::new() };
    let mut reports = Vec::new();
    let mut timings = Vec::new();
    for &slice in slices {
        let start = Instant::now();
        let mut produced = pool.install(|| ctx.run(slice, out, &mut writer))?;
        for r in &mut produced {
            for (k, v) in cfg.exponents.pairs() {
                r.extras.push((format!("label.{k}"), v));
            }
        }
        if slice != Slice::IdsBuild {
            writer.put(&format!("{}.reports", slice.stem()), &reports_text(&produced))?;
        }
        reports.extend(produced);
        timings.push((slice.name().to_string(), start.elapsed().as_secs_f64()));
    }
    let mut manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: cfg.threads,
        timings,
        files: writer.files,
    };
    if let Ok(text) = fs::read_to_string(out.join(MANIFEST_FILE)) {
        manifest.carry_over(&RunManifest::from_text(&text), out);
    }
    fs::write(out.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(RunOutcome { manifest, reports, output_dir: out.to_path_buf() })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: Model,
    stats_geometry: LatticeGeometry,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let model = cfg.model()?;
        let stats_geometry = LatticeGeometry::new(cfg.model.dimension, cfg.statistics.side)?;
        Ok(Self { cfg, model, stats_geometry })
    }

    fn null(&self, offset: u64) -> NullSpec {
        NullSpec { replicates: self.cfg.nulls.replicates, seed: self.cfg.master_seed.wrapping_add(0x1000 + offset), level: self.cfg.nulls.level }
    }

    fn run(&self, slice: Slice, out: &Path, w: &mut Writer) -> Result<Vec<TestReport>> {
        if slice == Slice::IdsBuild {
            let table = self.build_table()?;
            w.put(TABLE_FILE, &table.to_text())?;
            return Ok(Vec::new());
        }
        let table = self.load_table(out)?;
        match slice {
            Slice::IdsBuild => unreachable!(),
            Slice::BulkStats => self.bulk_stats(&table, w),
            Slice::EdgeStats => self.edge_stats(&table, w),
            Slice::WegnerMinami => self.wegner_minami(&table, w),
            Slice::Reduce => self.reduce(&table, w),
            Slice::Clt => self.clt(&table, w),
            Slice::Spacings => self.spacings(&table),
        }
    }

    fn build_table(&self) -> Result<IdsTable> {
        let cfg = self.cfg;
        let g = LatticeGeometry::new(cfg.model.dimension, cfg.ids.side)?;
        match cfg.route() {
            Route::Spectrum => pool_spectra(&self.model, &g, cfg.ids_seed(), cfg.ids_range()),
            Route::Counting => {
                let (lo, hi) = self.model.spectrum_bounds();
                let focus: Vec<(f64, f64, usize)> = cfg.ids.focus.iter().map(|f| (f[0], f[1], f[2] as usize)).collect();
                let mut grid = counting_grid(lo, hi, cfg.ids.grid_points, &focus);
                if let Some(l) = &cfg.lifshitz {
                    grid.extend(l.offsets.iter().map(|a| lo + a));
                    grid.sort_by(f64::total_cmp);
                    grid.dedup();
                }
                pool_counts(&self.model, &g, cfg.ids_seed(), cfg.ids_range(), grid)
            }
        }
    }

    fn load_table(&self, out: &Path) -> Result<IdsTable> {
        let path = out.join(TABLE_FILE);
        if !path.exists() {
            return Err(Error::MissingTable {
                path,
                hint: "run the `ids-build` subcommand with the same config and output directory first".into(),
            });
        }
        let table = IdsTable::read(&path)?;
        if table.model_id() != self.model.id() {
            return Err(Error::ModelMismatch { table: table.model_id().into(), sample: self.model.id() });
        }
        Ok(table)
    }

    fn volume(&self) -> usize {
        self.stats_geometry.sites()
    }

    /// Windowed spectra at `e0` covering unfolded `[-s, s]`, unfolded.
    fn unfolded_batch(&self, table: &IdsTable, e0: f64, s: f64, count: u64) -> Result<PointProcessBatch> {
        let v = self.volume() as f64;
        let n0 = table.evaluate(e0)?;
        let reach = (s + WINDOW_MARGIN) / v;
        let lo = table.quantile((n0 - reach).max(0.0))?;
        let hi = table.quantile((n0 + reach).min(1.0))?;
        let samples = self.windowed_samples(lo, hi, count)?;
        let unfolded = samples.iter().map(|x| unfold(x, table, e0, s)).collect::<Result<Vec<_>>>()?;
        collect_point_process(unfolded)
    }

    fn windowed_samples(&self, lo: f64, hi: f64, count: u64) -> Result<Vec<SpectrumSample<f64>>> {
        let cfg = self.cfg;
        cfg.statistics_range(count)
            .into_par_iter()
            .map(|r| eigenvalues_in_interval(&self.model.realize::<f64>(&self.stats_geometry, cfg.statistics_seed(), r)?, lo, hi))
            .collect()
    }

    fn bulk_energy(&self) -> Result<f64> {
        match self.cfg.anchor(&self.model) {
            Anchor::Interior(e) => Ok(e),
            Anchor::LowerEdge(_) => Err(Error::Config { field: "window.anchor".into(), message: "this slice needs a bulk anchor".into() }),
        }
    }

    fn bulk_stats(&self, table: &IdsTable, w: &mut Writer) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let s = cfg.window.half_width;
        let n = cfg.statistics.realizations;
        let batch = self.unfolded_batch(table, self.bulk_energy()?, s, n)?;
        w.put("bulk_atoms.tsv", &batch_to_text(&batch))?;
        let tv_thr = tv_null_threshold(2.0 * s, batch.len(), self.null(1));
        let mut out = vec![rename(poisson_count_test(&batch, -s, s, tv_thr)?, "bulk_poisson_count_tv")];
        let sp: Vec<f64> = batch.samples.iter().flat_map(|x| x.values.windows(2).map(|p| p[1] - p[0]).collect::<Vec<_>>()).collect();
        let ks_thr = spacing_null_threshold(s, batch.len(), SpacingStatistic::Ks, self.null(2));
        out.push(TestReport::new("bulk_spacing_ks", spacing_statistic(&sp, SpacingStatistic::Ks), sp.len(), ks_thr));
        let intensity = batch.intensity();
        out.push(
            TestReport::new("bulk_intensity", (intensity - 1.0).abs(), batch.len(), INTENSITY_TOLERANCE).with_extra("intensity", intensity),
        );
        Ok(out)
    }

    fn edge_stats(&self, table: &IdsTable, w: &mut Writer) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let edge = self.model.spectrum_bounds().0;
        // a spectrum-route table starts at its smallest pooled eigenvalue, above inf Σ
        let anchor = edge.max(table.knots()[0]);
        let mass = cfg.window_mass(self.volume());
        let batch = self.unfolded_batch(table, anchor, mass, cfg.statistics.realizations)?;
        w.put("edge_atoms.tsv", &batch_to_text(&batch))?;
        let mut out = vec![rename(half_line_check(&batch, EdgeSide::Lower, HALF_LINE_MARGIN, HALF_LINE_THRESHOLD), "edge_half_line")];
        let thr = tv_null_threshold(mass, batch.len(), self.null(3));
        out.push(rename(poisson_count_test(&batch, 0.0, mass, thr)?, "edge_poisson_count_tv"));
        if let Some(l) = &cfg.lifshitz {
            let fit = table.lifshitz_exponent_fit(edge, &l.offsets)?;
            out.push(
                TestReport::new("lifshitz_exponent", (fit.rho - LIFSHITZ_TARGET).abs(), fit.used.len(), LIFSHITZ_TOLERANCE)
                    .with_extra("rho", fit.rho)
                    .with_extra("intercept", fit.intercept)
                    .with_extra("residual_norm", fit.residual_norm)
                    .with_extra("skipped", fit.skipped.len() as f64),
            );
        }
        Ok(out)
    }

    fn nested_intervals(&self, table: &IdsTable, levels: usize) -> Result<Vec<(f64, f64)>> {
        let v = self.volume();
        let mass = self.cfg.window_mass(v);
        let anchor = self.cfg.anchor(&self.model);
        (1..=levels).map(|k| table.interval_for_mass(anchor, mass * k as f64 / levels as f64, v)).collect()
    }

    fn wegner_minami(&self, table: &IdsTable, w: &mut Writer) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let est = &cfg.estimates;
        let levels = est.hom_levels;
        let intervals = self.nested_intervals(table, levels)?;
        let count = est.realizations.unwrap_or(cfg.statistics.realizations);
        let batch = CountBatch::from_inertia(&self.model, &self.stats_geometry, cfg.statistics_seed(), cfg.statistics_range(count), &intervals)?;
        let mut counts_text = String::from("realization");
        for k in 1..=levels {
            write!(counts_text, "\tI{k}").unwrap();
        }
        counts_text.push('\n');
        for (r, row) in cfg.statistics_range(count).zip(&batch.counts) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(counts_text, "{r}\t{}", cells.join("\t")).unwrap();
        }
        w.put("wegner_counts.tsv", &counts_text)?;

        let mut constants = BoundConstants::from_density(self.model.disorder.density_sup());
        if let Some(c) = est.wegner_constant {
            constants.wegner = c;
        }
        if let Some(c) = est.minami_constant {
            constants.minami = c;
        }
        constants.hom_mass_floor = est.hom_floor;
        let saturating = self.model.kernel.support_radius() == 0;
        let mut out = Vec::new();
        for (k, &iv) in intervals.iter().enumerate() {
            let r = wegner_estimate(&batch, k, iv, table, &constants)?;
            let c = &r.classical;
            let report = if saturating {
                TestReport::new(format!("wegner_saturation_I{}", k + 1), c.saturation_z().abs(), c.realizations, SE_MULTIPLE)
            } else {
                TestReport::new(format!("wegner_classical_I{}", k + 1), c.estimate + 2.0 * c.standard_error, c.realizations, c.bound)
            };
            out.push(report.with_extra("estimate", c.estimate).with_extra("standard_error", c.standard_error).with_extra("bound", c.bound));
        }
        let top = levels - 1;
        let r = wegner_estimate(&batch, top, intervals[top], table, &constants)?;
        let e = &r.enhanced;
        out.push(
            TestReport::new("wegner_enhanced", e.estimate + 2.0 * e.standard_error, e.realizations, e.bound)
                .with_extra("estimate", e.estimate)
                .with_extra("standard_error", e.standard_error),
        );
        out.push(
            TestReport::new("wegner_ratio", (r.ratio - 1.0).abs(), e.realizations, WEGNER_RATIO_TOLERANCE)
                .with_extra("ratio", r.ratio)
                .with_extra("expected", r.expected)
                .with_extra("discrepancy", r.discrepancy)
                .with_extra("discrepancy_se", r.discrepancy_se),
        );
        let m = minami_estimate(&batch, top, intervals[top], table, &constants)?;
        for (name, rep) in [("minami_classical", &m.classical), ("minami_enhanced", &m.enhanced)] {
            out.push(
                TestReport::new(name, rep.estimate + 2.0 * rep.standard_error, rep.realizations, rep.bound)
                    .with_extra("estimate", rep.estimate)
                    .with_extra("standard_error", rep.standard_error),
            );
        }
        let columns: Vec<usize> = (0..levels).collect();
        let hom = high_order_moment(&batch, &columns, &intervals, table, &constants)?;
        out.push(
            TestReport::new(format!("hom_{levels}"), hom.estimate + 2.0 * hom.standard_error, hom.realizations, hom.bound)
                .with_extra("estimate", hom.estimate)
                .with_extra("standard_error", hom.standard_error),
        );
        let wc = wcontrol_decay(
            &self.model,
            intervals[top],
            &est.wcontrol_sides,
            cfg.statistics_seed(),
            cfg.statistics_range(est.wcontrol_realizations),
            table,
        )?;
        w.put("wcontrol.tsv", &wcontrol_text(&wc))?;
        let worst = wc.rows.iter().map(|r| r.z()).fold(0.0, f64::max);
        let mut rep = TestReport::new("wcontrol", worst, wc.rows.len(), SE_MULTIPLE).with_extra("non_growing", wc.non_growing as u8 as f64);
        if let Some(slope) = wc.decay_slope {
            rep = rep.with_extra("decay_slope", slope);
        }
        for row in &wc.rows {
            rep = rep.with_extra(format!("z_L{}", row.side), row.z());
        }
        out.push(rep);
        Ok(out)
    }

    fn reduce(&self, table: &IdsTable, w: &mut Writer) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let rc = &cfg.reduction;
        if !rc.retain_eigenvectors {
            return Err(Error::Config {
                field: "reduction.retain_eigenvectors".into(),
                message: "box reduction needs global eigenvectors; set reduction.retain_eigenvectors = true".into(),
            });
        }
        let g = &self.stats_geometry;
        let side = g.side();
        let anchor = cfg.anchor(&self.model);
        let window = table.interval_for_mass(anchor, rc.window_mass, self.volume())?;
        let seed = cfg.statistics_seed();
        let range = cfg.statistics_range(rc.realizations);
        let (l, lp) = scales(side, rc.c1, rc.c2);
        let dec = decompose(g, l, lp)?;
        let (report, centers) = reduction_batch(&self.model, g, seed, range.clone(), &dec, window, cfg.boundary())?;
        w.put("reduction.tsv", &report.to_text())?;
        let mut xs: Vec<f64> = centers.iter().flat_map(|c| c.entries.iter().filter_map(|e| e.fit.map(|f| f.xi))).collect();
        xs.sort_by(f64::total_cmp);
        let xi = xs.get(xs.len() / 2).copied().unwrap_or(0.0);
        let median = report.error_quantile(0.5).unwrap_or(f64::INFINITY);
        let fraction = report.matched_fraction();
        let mut out = vec![
            TestReport::new("reduction_unmatched_fraction", 1.0 - fraction, report.matched(), 1.0 - MATCHED_FRACTION)
                .with_extra("matched_fraction", fraction)
                .with_extra("matched_fraction_of_window", report.matched_fraction_of_window())
                .with_extra("box_side", l as f64)
                .with_extra("buffer", lp as f64),
            TestReport::new("reduction_median_error", median, report.matched(), 10.0 * (-xi * lp as f64 / 2.0).exp())
                .with_extra("median_xi", xi),
        ];
        let mut medians = Vec::new();
        for &c2 in &rc.c2_grid {
            let (l2, lp2) = (l, scales(side, rc.c1, c2).1);
            let dec2 = decompose(g, l2, lp2)?;
            let (rep2, _) = reduction_batch(&self.model, g, seed, range.clone(), &dec2, window, cfg.boundary())?;
            medians.push((c2, rep2.error_quantile(0.5).unwrap_or(f64::INFINITY)));
        }
        let worst_step = medians.windows(2).map(|p| p[1].1 / p[0].1).fold(0.0, f64::max);
        let mut mono = TestReport::new("reduction_monotone_c2", worst_step, medians.len(), 1.0);
        for (c2, m) in &medians {
            mono = mono.with_extra(format!("median_c2_{c2}"), *m);
        }
        out.push(mono);

        let boxed = dec.box_volume();
        let box_window = table.interval_for_mass(anchor, rc.box_mass, boxed)?;
        let per = dec.len() as u64;
        let needed = (rc.box_samples as u64).div_ceil(per);
        if needed > cfg.statistics.realizations {
            return Err(Error::Config {
                field: "reduction.box_samples".into(),
                message: format!("needs {needed} realizations of {per} boxes, pool has {}", cfg.statistics.realizations),
            });
        }
        let locals = local_batch(&self.model, g, seed, cfg.statistics_range(needed), &dec, box_window, cfg.boundary())?;
        let b = bernoulli_sample(&locals, box_window, boxed, table, &rc.increment_grid)?;
        out.push(
            TestReport::new("box_bernoulli_ratio", (b.ratio - 1.0).abs(), b.samples, BOX_RATIO_TOLERANCE)
                .with_extra("p_hat", b.p_hat)
                .with_extra("expected", b.expected)
                .with_extra("standard_error", b.standard_error),
        );
        let worst = b.increments.iter().map(|i| (i.empirical - i.predicted).abs() / i.standard_error).fold(0.0, f64::max);
        let mut inc = TestReport::new("box_increments", worst, b.increments.len(), crate::reduction::INCREMENT_TOLERANCE_SE);
        for i in &b.increments {
            inc = inc.with_extra(format!("empirical_{}_{}", i.x, i.y), i.empirical).with_extra(format!("predicted_{}_{}", i.x, i.y), i.predicted);
        }
        out.push(inc);
        Ok(out)
    }

    fn clt(&self, table: &IdsTable, w: &mut Writer) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let side = cfg.clt.side.unwrap_or(cfg.statistics.side);
        let g = LatticeGeometry::new(cfg.model.dimension, side)?;
        let v = g.sites();
        let iv = table.interval_for_mass(cfg.anchor(&self.model), cfg.clt.mass, v)?;
        let batch = CountBatch::from_inertia(&self.model, &g, cfg.statistics_seed(), cfg.statistics_range(cfg.clt.realizations), &[iv])?;
        let counts = batch.column(0);
        let text: String = counts.iter().map(|c| format!("{c}\n")).collect();
        w.put("clt_counts.tsv", &format!("count\n{text}"))?;
        let report = CountReport::new(counts, table.interval_mass(iv.0, iv.1)? * v as f64)?;
        let clt = clt_report(&report, CLT_KS_THRESHOLD, CLT_SKEW_THRESHOLD)?;
        let rows = deviation_report(&report, &cfg.clt.gammas)?;
        let rise = rows.windows(2).map(|p| p[1].1 - p[0].1).fold(0.0, f64::max);
        let mut dev = TestReport::new("clt_deviation_decay", rise, report.counts.len(), 0.0).with_extra("monotone", decays_monotonically(&rows) as u8 as f64);
        for (g, f) in &rows {
            dev = dev.with_extra(format!("fraction_gamma_{g}"), *f);
        }
        Ok(vec![
            clt.ks.with_extra("mean", clt.mean).with_extra("variance", clt.variance).with_extra("target_mean", report.target_mean),
            clt.skewness.with_extra("excess_kurtosis", clt.excess_kurtosis),
            dev,
        ])
    }

    fn spacings(&self, table: &IdsTable) -> Result<Vec<TestReport>> {
        let cfg = self.cfg;
        let s = cfg.spacings.half_width;
        let v = self.volume() as f64;
        let n0 = table.evaluate(self.bulk_energy()?)?;
        let (a, b) = (table.quantile((n0 - s / v).max(0.0))?, table.quantile((n0 + s / v).min(1.0))?);
        let count = cfg.spacings.realizations;
        let samples = self.windowed_samples(a, b, count)?;
        let pooled = SpacingsReport::pool(samples.iter().map(|x| spacings(x, table, a, b)).collect::<Result<Vec<_>>>()?);
        let curve = dls(&pooled)?;
        let thr = spacing_null_threshold(s, count as usize, SpacingStatistic::Dls, self.null(4));
        let ks_thr = spacing_null_threshold(s, count as usize, SpacingStatistic::Ks, self.null(5));
        Ok(vec![
            TestReport::new("dls_sup_distance", curve.sup_distance, pooled.spacings.len(), thr),
            TestReport::new("spacing_ks_wide", spacing_statistic(&pooled.spacings, SpacingStatistic::Ks), pooled.spacings.len(), ks_thr),
        ])
    }
}

fn rename(mut r: TestReport, name: &str) -> TestReport {
    r.name = name.to_string();
    r
}

fn wcontrol_text(r: &WcontrolReport) -> String {
    let mut out = String::from("side\tmean_count\texpected\tdiscrepancy\tstandard_error\n");
    for row in &r.rows {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", row.side, row.mean_count, row.expected, row.discrepancy, row.standard_error).unwrap();
    }
    out
}
