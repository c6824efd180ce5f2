//! Reproducible runs: configuration, solver validation, the stage pipeline
//! and figure export.

pub mod config;
pub mod pipeline;
pub mod svg;
pub mod validation;

pub use config::{RunConfig, OUT_ENV};
pub use pipeline::{ExportFormat, Pipeline, Stage, ARMS, EXPORT_IDS};
pub use validation::{run_validation, Preset, ValidationReport};
