//! Error type shared by every module.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("invalid angular scale count K={k} for L={angles}: need 1 <= K < log2(L)")]
    InvalidAngularScale { k: u32, angles: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("filter bank mismatch: {0}")]
    BankMismatch(String),

    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("class {0} has no training samples")]
    DegenerateClass(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate kernel bandwidth (sigma^2 = {0})")]
    DegenerateBandwidth(f64),

    #[error("SVM for class {class} did not converge after {iterations} iterations (violation {gap:.3e})")]
    NonConvergence { class: usize, iterations: u64, gap: f64 },

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed record in {path}: {reason}")]
    MalformedRecord { path: PathBuf, reason: String },

    #[error("truncated file {path}: {len} bytes is not a multiple of record size {record}")]
    TruncatedFile { path: PathBuf, len: usize, record: usize },

    #[error("class directory {0} contains no readable images")]
    EmptyClass(String),

    #[error("expected {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("class {class} has {have} images, need more than {need}")]
    InsufficientClassSize { class: usize, have: usize, need: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
