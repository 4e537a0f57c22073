//! Driver for the solve, correct, fit and compare stages.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
