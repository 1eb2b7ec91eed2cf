//! Experiment runner for the `owc-aloha` analysis engine: TOML configuration,
//! figure presets, parameter sweeps and CSV output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::{load_config, parse_config, ConfigError, ExperimentSpec, Mode, Overrides};
pub use experiment::{run_experiment, run_sinr_cdf, CdfReport, CdfRow, ResultRow, RowMode};
pub use output::{emit_csv, parse_csv, write_cdf_csv, write_csv};
