//! Configuration-driven experiments over the `seqprobe-core` engine.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod verify;

pub use config::{parse_config, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiment::{order_table, run_experiment, ResultTable};
pub use output::{emit_csv, write_metadata, Metadata};
