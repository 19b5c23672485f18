//! Experiment harness around `lgv-core`: run configuration, the LGVW
//! weight file format, IDX ingestion, CSV/JSON reports and the command
//! implementations behind the `lgv` binary.

pub mod config;
pub mod error;
pub mod harness;
pub mod idx;
pub mod report;
pub mod weights;

pub use config::RunConfig;
pub use error::{LabError, Result};
