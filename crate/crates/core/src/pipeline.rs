//! One symmetry at one energy: coupling once, then a solve per step length.

use crate::basis::{ChannelBasis, Symmetry, DEFAULT_QUAD_ORDER};
use crate::coupling::{charge_eigensystem, coupling_matrix, ChargeEigensystem, CouplingMatrix};
use crate::error::{Error, Result};
use crate::matcher::{extract_amplitudes, AmplitudeVector, MatchOptions, MatchResult, Truncation};
use crate::observables::{momentum, tmatrix_table, StepTag, TMatrixTable};
use crate::propagator::outer::DEFAULT_TAYLOR_ORDER;
use crate::propagator::{propagate, PropagatorOptions, RadialGrid, RadialSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub symmetry: Symmetry,
    /// Total energy, Ry.
    pub energy: f64,
    pub basis_size: usize,
    pub quad_order: usize,
    /// Matching radius, a.u.
    pub r0: f64,
    pub taylor_order: usize,
    pub entrance: usize,
    pub truncation: Truncation,
}

impl SolveConfig {
    pub fn new(symmetry: Symmetry, energy: f64, r0: f64) -> Self {
        Self {
            symmetry,
            energy,
            basis_size: 6,
            quad_order: DEFAULT_QUAD_ORDER,
            r0,
            taylor_order: DEFAULT_TAYLOR_ORDER,
            entrance: 0,
            truncation: Truncation::Series,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: SolveConfig,
    pub basis: ChannelBasis,
    pub coupling: CouplingMatrix,
    pub eigensystem: ChargeEigensystem,
    pub system: RadialSystem,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub h: f64,
    pub amplitudes: AmplitudeVector,
    pub matched: MatchResult,
    pub table: TMatrixTable,
    /// Condition of the channel values at `P·R0`.
    pub condition: f64,
}

pub fn prepare(config: &SolveConfig) -> Result<Prepared> {
    if !(config.energy > 0.0) || !config.energy.is_finite() {
        return Err(Error::InvalidParameter(format!("total energy must be positive, got {} Ry", config.energy)));
    }
    let basis = ChannelBasis::with_size(config.symmetry, config.basis_size)?;
    let coupling = coupling_matrix(&basis, momentum(config.energy), config.quad_order)?;
    let eigensystem = charge_eigensystem(&coupling)?;
    let system = RadialSystem::from_coupling(&coupling);
    Ok(Prepared { config: config.clone(), basis, coupling, eigensystem, system })
}

impl Prepared {
    pub fn solve(&self, h: f64) -> Result<RunOutput> {
        let grid = RadialGrid::new(h, self.config.r0, self.coupling.momentum())?;
        let options = PropagatorOptions { taylor_order: self.config.taylor_order, ..Default::default() };
        let sol = propagate(&self.system, &grid, options)?;
        let matched = extract_amplitudes(
            &sol,
            &self.eigensystem,
            &self.system,
            MatchOptions { entrance: self.config.entrance, truncation: self.config.truncation },
        )?;
        let amplitudes = matched.amplitude_vector(self.config.symmetry, self.config.energy);
        let table = tmatrix_table(&amplitudes, &self.basis, StepTag::Raw(h))?;
        Ok(RunOutput { h, amplitudes, matched, table, condition: sol.condition })
    }
}
