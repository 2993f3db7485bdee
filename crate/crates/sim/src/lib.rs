//! Monte Carlo harness, configuration files and fixture dumps around
//! `onebit-core`. The `onebit` binary is a thin front end over this crate.

pub mod config;
pub mod fixtures;
pub mod harness;

pub use config::RunConfig;
pub use harness::{ber_sweep, chest_mse_sweep, export_results, SweepResult, SweepRow};
