//! Configuration, experiment orchestration and CSV output for the `pacer`
//! command-line tool. The numerics live in `pacer-core`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::{load_config, parse_config, write_config, ExperimentConfig};
pub use error::CliError;
pub use experiment::{run_and_write, run_experiment, Overrides, RunOutput};
