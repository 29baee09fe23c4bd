//! Experiment configuration: a TOML file with strict keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::{Anchor, Route};
use crate::lattice::{Boundary, DisorderSpec, HoppingKernel, Model};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_VAR: &str = "ANDERSON_LAB_OUT";

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default = "defaults::threads")]
    pub threads: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub ids: IdsConfig,
    pub statistics: PoolConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub nulls: NullConfig,
    #[serde(default)]
    pub estimates: EstimatesConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub spacings: SpacingsConfig,
    #[serde(default)]
    pub lifshitz: Option<LifshitzConfig>,
    /// Exponent labels attached to reports; not used in any computation.
    #[serde(default)]
    pub exponents: ExponentLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    pub hopping: HoppingConfig,
    pub disorder: DisorderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoppingConfig {
    NearestNeighbor { t: f64 },
    OnSite { h0: f64 },
    Explicit { entries: Vec<HopEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopEntry {
    pub offset: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisorderConfig {
    Uniform { min: f64, max: f64, coupling: f64 },
    TwoLevel { p: f64, low: f64, high: f64, width: f64, coupling: f64 },
    /// `(u, x)` knots of the quantile function.
    Tabulated { knots: Vec<[f64; 2]>, coupling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteConfig {
    Spectrum,
    Counting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsConfig {
    pub side: usize,
    /// Defaults to `master_seed`.
    pub seed: Option<u64>,
    #[serde(default)]
    pub first: u64,
    pub realizations: u64,
    #[serde(default = "defaults::route")]
    pub route: RouteConfig,
    /// Coarse grid points across the almost-sure spectrum (counting route).
    #[serde(default = "defaults::grid_points")]
    pub grid_points: usize,
    /// Extra `[lo, hi, points]` ranges (counting route).
    #[serde(default)]
    pub focus: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub side: usize,
    /// Defaults to `master_seed + 1`.
    pub seed: Option<u64>,
    #[serde(default)]
    pub first: u64,
    pub realizations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorConfig {
    Bulk { energy: f64 },
    /// Bottom of the almost-sure spectrum.
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(default = "defaults::anchor")]
    pub anchor: AnchorConfig,
    /// Unfolded half-width of the bulk point-process window.
    #[serde(default = "defaults::half_width")]
    pub half_width: f64,
    /// Target `N(I)|Λ|` for estimates and the edge window.
    pub mass: Option<f64>,
    /// Alternative to `mass`: `N(I)|Λ| = log^α |Λ|`.
    pub edge_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullConfig {
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    #[serde(default = "defaults::level")]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesConfig {
    /// Defaults to the whole statistics pool.
    pub realizations: Option<u64>,
    #[serde(default = "defaults::wcontrol_sides")]
    pub wcontrol_sides: Vec<usize>,
    #[serde(default = "defaults::wcontrol_realizations")]
    pub wcontrol_realizations: u64,
    /// Nesting depth of the high-order moment check.
    #[serde(default = "defaults::hom_levels")]
    pub hom_levels: usize,
    pub wegner_constant: Option<f64>,
    pub minami_constant: Option<f64>,
    #[serde(default = "defaults::hom_floor")]
    pub hom_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Periodic,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    #[serde(default = "defaults::c1")]
    pub c1: f64,
    #[serde(default = "defaults::c2")]
    pub c2: f64,
    #[serde(default = "defaults::c2_grid")]
    pub c2_grid: Vec<f64>,
    /// Global eigenvectors are needed for localization centers.
    #[serde(default)]
    pub retain_eigenvectors: bool,
    #[serde(default = "defaults::boundary")]
    pub boundary: BoundaryConfig,
    #[serde(default = "defaults::reduction_realizations")]
    pub realizations: u64,
    /// `N(I)|Λ|` of the global matching window.
    #[serde(default = "defaults::window_mass")]
    pub window_mass: f64,
    /// `N(I)|Λ_ℓ|` of the single-box window.
    #[serde(default = "defaults::box_mass")]
    pub box_mass: f64,
    #[serde(default = "defaults::box_samples")]
    pub box_samples: usize,
    #[serde(default = "defaults::increment_grid")]
    pub increment_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    /// Defaults to `statistics.side`.
    pub side: Option<usize>,
    #[serde(default = "defaults::clt_mass")]
    pub mass: f64,
    #[serde(default = "defaults::clt_realizations")]
    pub realizations: u64,
    #[serde(default = "defaults::gammas")]
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingsConfig {
    #[serde(default = "defaults::spacing_half_width")]
    pub half_width: f64,
    #[serde(default = "defaults::spacing_realizations")]
    pub realizations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifshitzConfig {
    /// Offsets `a` above the spectral edge.
    pub offsets: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentLabels {
    pub rho: Option<f64>,
    pub rho_prime: Option<f64>,
    pub rho_second: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub beta: Option<f64>,
    pub beta_prime: Option<f64>,
    pub delta: Option<f64>,
}

impl ExponentLabels {
    /// Labels that are set, as `(name, value)`.
    pub fn pairs(&self) -> Vec<(&'static str, f64)> {
        [
            ("rho", self.rho),
            ("rho_prime", self.rho_prime),
            ("rho_second", self.rho_second),
            ("alpha", self.alpha),
            ("alpha_prime", self.alpha_prime),
            ("beta", self.beta),
            ("beta_prime", self.beta_prime),
            ("delta", self.delta),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

mod defaults {
    use super::*;

    pub fn threads() -> usize {
        1
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn route() -> RouteConfig {
        RouteConfig::Counting
    }
    pub fn grid_points() -> usize {
        201
    }
    pub fn anchor() -> AnchorConfig {
        AnchorConfig::Bulk { energy: 0.0 }
    }
    pub fn half_width() -> f64 {
        4.0
    }
    pub fn replicates() -> usize {
        1000
    }
    pub fn level() -> f64 {
        0.99
    }
    pub fn wcontrol_sides() -> Vec<usize> {
        vec![128, 256, 512]
    }
    pub fn wcontrol_realizations() -> u64 {
        2000
    }
    pub fn hom_levels() -> usize {
        3
    }
    pub fn hom_floor() -> f64 {
        1.0
    }
    pub fn c1() -> f64 {
        8.0
    }
    pub fn c2() -> f64 {
        3.0
    }
    pub fn c2_grid() -> Vec<f64> {
        vec![2.0, 3.0, 4.0]
    }
    pub fn boundary() -> BoundaryConfig {
        BoundaryConfig::Periodic
    }
    pub fn reduction_realizations() -> u64 {
        100
    }
    pub fn window_mass() -> f64 {
        20.0
    }
    pub fn box_mass() -> f64 {
        0.05
    }
    pub fn box_samples() -> usize {
        10_000
    }
    pub fn increment_grid() -> Vec<f64> {
        vec![0.2, 0.4, 0.6, 0.8]
    }
    pub fn clt_mass() -> f64 {
        100.0
    }
    pub fn clt_realizations() -> u64 {
        2000
    }
    pub fn gammas() -> Vec<f64> {
        vec![0.5, 0.6, 0.7, 0.8, 0.9]
    }
    pub fn spacing_half_width() -> f64 {
        20.0
    }
    pub fn spacing_realizations() -> u64 {
        300
    }
}

macro_rules! impl_default_from_empty {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("all fields have defaults")
            }
        }
    )*};
}

impl_default_from_empty!(WindowConfig, NullConfig, EstimatesConfig, ReductionConfig, CltConfig, SpacingsConfig);

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse { path: origin.into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn ids_seed(&self) -> u64 {
        self.ids.seed.unwrap_or(self.master_seed)
    }

    pub fn statistics_seed(&self) -> u64 {
        self.statistics.seed.unwrap_or(self.master_seed.wrapping_add(1))
    }

    pub fn ids_range(&self) -> std::ops::Range<u64> {
        self.ids.first..self.ids.first + self.ids.realizations
    }

    /// First `count` realizations of the statistics pool.
    pub fn statistics_range(&self, count: u64) -> std::ops::Range<u64> {
        self.statistics.first..self.statistics.first + count
    }

    pub fn route(&self) -> Route {
        match self.ids.route {
            RouteConfig::Spectrum => Route::Spectrum,
            RouteConfig::Counting => Route::Counting,
        }
    }

    pub fn boundary(&self) -> Boundary {
        match self.reduction.boundary {
            BoundaryConfig::Periodic => Boundary::Periodic,
            BoundaryConfig::Open => Boundary::Open,
        }
    }

    pub fn model(&self) -> Result<Model> {
        let d = self.model.dimension;
        let kernel = match &self.model.hopping {
            HoppingConfig::NearestNeighbor { t } => HoppingKernel::nearest_neighbor(d, *t),
            HoppingConfig::OnSite { h0 } => HoppingKernel::on_site(d, *h0),
            HoppingConfig::Explicit { entries } => HoppingKernel::new(d, entries.iter().map(|e| (e.offset.clone(), e.value))),
        }
        .map_err(|e| config_error("model.hopping", e.to_string()))?;
        let disorder = match &self.model.disorder {
            DisorderConfig::Uniform { min, max, coupling } => DisorderSpec::uniform(*min, *max, *coupling),
            DisorderConfig::TwoLevel { p, low, high, width, coupling } => DisorderSpec::two_level(*p, *low, *high, *width, *coupling),
            DisorderConfig::Tabulated { knots, coupling } => DisorderSpec::tabulated(knots.iter().map(|k| (k[0], k[1])).collect(), *coupling),
        }
        .map_err(|e| config_error("model.disorder", e.to_string()))?;
        Ok(Model::new(kernel, disorder))
    }

    pub fn anchor(&self, model: &Model) -> Anchor {
        match self.window.anchor {
            AnchorConfig::Bulk { energy } => Anchor::Interior(energy),
            AnchorConfig::Edge => Anchor::LowerEdge(model.spectrum_bounds().0),
        }
    }

    /// `N(I)|Λ|` of the estimate and edge windows at volume `volume`.
    pub fn window_mass(&self, volume: usize) -> f64 {
        match (self.window.mass, self.window.edge_alpha) {
            (_, Some(alpha)) => (volume as f64).ln().powf(alpha),
            (Some(m), None) => m,
            (None, None) => 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(config_error("threads", "must be at least 1"));
        }
        if self.model.dimension == 0 {
            return Err(config_error("model.dimension", "must be at least 1"));
        }
        self.model()?;
        let sides = [
            ("ids.side", Some(self.ids.side)),
            ("statistics.side", Some(self.statistics.side)),
            ("clt.side", self.clt.side),
        ];
        for (field, side) in sides {
            if side.is_some_and(|s| s < 8) {
                return Err(config_error(field, "side lengths must be at least 8"));
            }
        }
        if self.estimates.wcontrol_sides.iter().any(|&s| s < 8) {
            return Err(config_error("estimates.wcontrol_sides", "side lengths must be at least 8"));
        }
        let counts = [
            ("ids.realizations", self.ids.realizations),
            ("statistics.realizations", self.statistics.realizations),
            ("estimates.wcontrol_realizations", self.estimates.wcontrol_realizations),
            ("reduction.realizations", self.reduction.realizations),
            ("clt.realizations", self.clt.realizations),
            ("spacings.realizations", self.spacings.realizations),
            ("nulls.replicates", self.nulls.replicates as u64),
            ("reduction.box_samples", self.reduction.box_samples as u64),
        ];
        for (field, n) in counts {
            if n == 0 {
                return Err(config_error(field, "counts must be positive"));
            }
        }
        let pool = self.statistics.realizations;
        let drawn = [
            ("estimates.realizations", self.estimates.realizations.unwrap_or(pool)),
            ("estimates.wcontrol_realizations", self.estimates.wcontrol_realizations),
            ("reduction.realizations", self.reduction.realizations),
            ("clt.realizations", self.clt.realizations),
            ("spacings.realizations", self.spacings.realizations),
        ];
        for (field, n) in drawn {
            if n > pool {
                return Err(config_error(field, format!("draws {n} realizations from a statistics pool of {pool}")));
            }
        }
        let ids = self.ids_range();
        let stats = self.statistics_range(pool);
        if self.ids_seed() == self.statistics_seed() && ids.start < stats.end && stats.start < ids.end {
            return Err(config_error(
                "statistics.first",
                format!("statistics realizations {stats:?} overlap the IDS pool {ids:?} under seed {}", self.ids_seed()),
            ));
        }
        if !(self.nulls.level > 0.0 && self.nulls.level < 1.0) {
            return Err(config_error("nulls.level", "must lie in (0, 1)"));
        }
        if !(self.window.half_width > 0.0) {
            return Err(config_error("window.half_width", "must be positive"));
        }
        match (self.window.mass, self.window.edge_alpha) {
            (Some(_), Some(_)) => return Err(config_error("window.edge_alpha", "set either window.mass or window.edge_alpha")),
            (Some(m), None) if !(m > 0.0) => return Err(config_error("window.mass", "must be positive")),
            _ => {}
        }
        if self.ids.route == RouteConfig::Counting && self.ids.grid_points < 2 {
            return Err(config_error("ids.grid_points", "need at least two grid points"));
        }
        if self.ids.focus.iter().any(|f| !(f[0] < f[1]) || f[2] < 2.0) {
            return Err(config_error("ids.focus", "each range needs lo < hi and at least two points"));
        }
        let r = &self.reduction;
        if !(r.c1 > 0.0 && r.c2 > 0.0) || r.c2_grid.iter().any(|&c| !(c > 0.0)) {
            return Err(config_error("reduction.c1", "scale constants must be positive"));
        }
        if self.estimates.hom_levels < 2 {
            return Err(config_error("estimates.hom_levels", "needs at least two nested intervals"));
        }
        if self.clt.gammas.is_empty() {
            return Err(config_error("clt.gammas", "needs at least one exponent"));
        }
        if let Some(l) = &self.lifshitz {
            if l.offsets.len() < 3 || l.offsets.iter().any(|&a| !(a > 0.0)) {
                return Err(config_error("lifshitz.offsets", "needs at least three positive offsets"));
            }
        }
        Ok(())
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| self.output_dir.clone())
    }
}
