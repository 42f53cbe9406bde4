//! Experiment harness for the lookahead decoders.
//!
//! * [`toy`] generates the seeded toy corpus, vocabulary, model descriptors
//!   and task splits.
//! * [`runner`] decodes a dataset with one method and aggregates metrics.
//! * [`grid`] tunes CDSL thresholds on a validation split.
//! * [`report`] writes and joins result tables.

pub mod config;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod models;
pub mod report;
pub mod runner;
pub mod toy;

pub use config::{DecodeParams, ExperimentConfig, Method};
pub use error::{HarnessError, Result};
