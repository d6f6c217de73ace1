//! Experiment runner comparing the GLMB filter with moving-window smoothers.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, RunError, Summary};
