//! Pipelines behind the `delayminer` command: discovery of extraneous
//! delays, model enhancement, optimization, simulation and evaluation.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod pipeline;
pub mod scenarios;

pub use cli::run;
pub use error::CliError;
