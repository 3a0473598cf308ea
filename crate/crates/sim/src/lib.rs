//! Experiment runner for the PON timing-recovery core: TOML configuration,
//! preset expansion, parallel execution and CSV/text output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;

pub use config::{ConfigError, Overrides, Preset, SimConfig};
pub use runner::{run, Outcome, RunRow};
