//! Experiment driver on top of `dnls-wkb-core`.

pub mod config;
pub mod fit;
pub mod report;
pub mod sweep;
pub mod validate;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use fit::{fit_rate, RateFit};
pub use report::{emit_report, read_json, Check, Report, Row, Threshold};
pub use sweep::{run_single, run_sweep, Plan};
pub use validate::validate;
