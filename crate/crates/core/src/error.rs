use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hopping kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid disorder specification: {0}")]
    InvalidDisorder(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("inertia count failed: pivot stayed below threshold after {retries} energy perturbations")]
    InertiaRetriesExceeded { retries: usize },
    #[error("spectrum window ({lo}, {hi}] does not cover the requested range ({req_lo}, {req_hi}]")]
    WindowNotCovered { lo: f64, hi: f64, req_lo: f64, req_hi: f64 },
    #[error("operation needs a full spectrum, got a windowed sample")]
    PartialSpectrum,
    #[error("IDS table is empty")]
    EmptyTable,
    #[error("model id mismatch: table has {table}, sample has {sample}")]
    ModelMismatch { table: String, sample: String },
    #[error("provenance overlap: realization {realization} of seed {seed} was used to build the IDS table")]
    ProvenanceOverlap { seed: u64, realization: u64 },
    #[error("energy {energy} outside table support [{lo}, {hi}]")]
    OutsideSupport { energy: f64, lo: f64, hi: f64 },
    #[error("quantile level {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("inverted interval [{0}, {1}]")]
    InvertedInterval(f64, f64),
    #[error("requested mass {requested} exceeds available mass {available}")]
    InsufficientMass { requested: f64, available: f64 },
    #[error("interval [{0}, {1}] carries no IDS mass")]
    ZeroMass(f64, f64),
    #[error("fit needs at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch mismatch: {0}")]
    BatchMismatch(String),
    #[error("need at least {needed} realizations, got {got}")]
    TooFewRealizations { needed: usize, got: usize },
    #[error("intervals are not nested")]
    NotNested,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("decomposition infeasible: side {side} + buffer {buffer} exceeds L = {length}")]
    Infeasible { side: usize, buffer: usize, length: usize },
    #[error("realization mismatch: {0} vs {1}")]
    RealizationMismatch(u64, u64),
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing IDS table {path}: {hint}")]
    MissingTable { path: PathBuf, hint: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
