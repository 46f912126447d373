//! Resource prediction and allocation toolkit for parametrizable 3x3
//! convolution blocks on FPGAs.
//!
//! The crate covers the full pipeline: a behavioral fixed-point simulator of
//! the four block variants, synthesis-sweep dataset generation and ingestion,
//! Pearson correlation and error-metric analysis, polynomial/segmented
//! regression for per-resource cost models, and budgeted integer allocation
//! of block instances on a target device.

pub mod alloc;
pub mod analysis;
pub mod data;
pub mod error;
pub mod model;
pub mod regression;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    descriptor, validate_config, BlockDescriptor, BlockKind, ConfigPoint, PlatformCapacity,
    ResourceKind, ResourceVector,
};

/// Version stamp written into model files and run manifests.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
