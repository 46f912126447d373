//! Crate-wide error type.

use crate::model::{BlockKind, ResourceKind};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),

    #[error("unknown block `{0}` (expected conv1..conv4)")]
    UnknownBlock(String),

    #[error("unknown resource `{0}` (expected llut|mlut|ff|cchain|dsp)")]
    UnknownResource(String),

    #[error("{field} = {value} is below the sweep minimum 3")]
    WidthBelowSweep { field: &'static str, value: u8 },

    #[error("{field} = {value} is above the sweep maximum 16")]
    WidthAboveSweep { field: &'static str, value: u8 },

    #[error("{kind} operand limit is {limit} bits, got {field} = {value}")]
    OperandLimit {
        kind: BlockKind,
        limit: u8,
        field: &'static str,
        value: u8,
    },

    #[error("{what} = {value} does not fit in {bits} signed bits")]
    OperandOutOfRange {
        what: &'static str,
        value: i64,
        bits: u8,
    },

    #[error("packed operand {value} exceeds the {bits}-bit multiplier port")]
    PackGeometry { value: i64, bits: u8 },

    #[error("kernel already holds 9 coefficients")]
    KernelOverfull,

    #[error("kernel not fully loaded ({loaded}/9 coefficients)")]
    KernelNotLoaded { loaded: u8 },

    #[error("expected {expected} window(s) per cycle, got {got}")]
    WrongWindowCount { expected: usize, got: usize },

    #[error("frame must be at least 3x3, got {height}x{width}")]
    FrameTooSmall { height: usize, width: usize },

    #[error("frame pixel data has {got} entries, expected {expected}")]
    FrameShape { expected: usize, got: usize },

    #[error("empty block set")]
    EmptyBlockSet,

    #[error("inverted range: {name} {lo}..={hi}")]
    InvertedRange { name: &'static str, lo: u8, hi: u8 },

    #[error("line {line}: {message}")]
    CsvFormat { line: usize, message: String },

    #[error("line {line}: duplicate configuration ({block}, {platform}, {d}, {c})")]
    DuplicateConfig {
        line: usize,
        block: BlockKind,
        platform: String,
        d: u8,
        c: u8,
    },

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("MAPE undefined: every truth value is zero")]
    AllTruthsZero,

    #[error("no records for block {0}")]
    NoRecords(BlockKind),

    #[error(
        "insufficient data: {got} distinct configurations for a {terms}-term basis (need {needed})"
    )]
    InsufficientData {
        got: usize,
        terms: usize,
        needed: usize,
    },

    #[error("rank-deficient design matrix over basis [{basis}]")]
    RankDeficient { basis: String },

    #[error("segmented-regression guard: |pearson({resource}, data_bits)| = {r:.3} exceeds 0.05")]
    SegmentedGuard { resource: ResourceKind, r: f64 },

    #[error("segmented regression needs at least 2 distinct coeff_bits values, got {0}")]
    TooFewDistinctValues(usize),

    #[error("no segmented fit reaches r2 {threshold} (best {best_r2:.4})")]
    SegmentedBelowThreshold { threshold: f64, best_r2: f64 },

    #[error("no model for ({block}, {resource})")]
    MissingModel {
        block: BlockKind,
        resource: ResourceKind,
    },

    #[error("malformed model file: {0}")]
    ModelFile(String),

    #[error("zero {resource} capacity with nonzero demand")]
    ZeroCapacity { resource: ResourceKind },

    #[error("search space of {states} states exceeds the brute-force limit {limit}")]
    SearchSpaceTooLarge { states: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
