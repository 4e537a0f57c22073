//! Shared fixtures for the benchmarks.

use hpw_core::{SolveConfig, Symmetry};

/// Total energy of the desk runs, Ry.
pub const ENERGY: f64 = 2.0;

pub const R0: f64 = 300.0;

pub fn desk_config(symmetry: Symmetry) -> SolveConfig {
    SolveConfig::new(symmetry, ENERGY, R0)
}
