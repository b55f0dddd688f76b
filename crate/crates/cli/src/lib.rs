//! Configuration and mode dispatch for the `bnnprune` binary.

pub mod config;
mod run;

pub use config::{ConfigError, DatasetId, Mode, RunConfig};
pub use run::{compare_csv, dataset_signature, load_data, prune_report_csv, run};
