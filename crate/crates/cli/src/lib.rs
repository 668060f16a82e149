//! Experiment harness: configuration, the trial loop, CSV/JSON output,
//! aggregation over seeds and SVG plots.

pub mod config;
mod error;
pub mod experiment;
pub mod report;
pub mod svg;

pub use error::{HarnessError, Result};
