//! Configuration, scenario runners and report writing behind the `fcqn`
//! command.

pub mod config;
pub mod report;
pub mod run;

pub use config::{validate_config, validate_config_with, ConfigError, ExperimentConfig, Overrides, Scenario};
pub use report::{write_outputs, Outputs, Table};
pub use run::run;
