//! Radial propagation of the coupled system
//!
//! ```text
//! F''(ρ) + [1 - ν(ν+1)/ρ²] F(ρ) + (2/ρ) α F(ρ) = 0
//! ```
//!
//! from the origin to `P·R0`: a power-series start, the seven-node implicit
//! march on `[0, P·Δ]`, and Taylor steps of `2·P·h` beyond.

pub mod grid;
pub mod inner;
pub mod outer;
pub mod series;

use std::io::Write;

use log::debug;
use nalgebra::DMatrix;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::real::{Block, Real};

pub use grid::{RadialGrid, INNER_INTERVALS};
pub use outer::{MatchPoint, DEFAULT_TAYLOR_ORDER};
pub use series::FrobeniusSeries;

/// Inner nodes past `Δ` kept for the centered derivative at `Δ`.
const GHOST_NODES: usize = 4;

/// Outer steps between column re-orthogonalizations.
const OUTER_STABILIZE_EVERY: usize = 8;

/// Centrifugal strengths `ν(ν+1)` and the coupling `α` of one radial system.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSystem {
    centrifugal: Vec<f64>,
    coupling: DMatrix<f64>,
}

impl RadialSystem {
    pub fn new(centrifugal: Vec<f64>, coupling: DMatrix<f64>) -> Result<Self> {
        let n = centrifugal.len();
        if n == 0 {
            return Err(Error::InvalidParameter("radial system needs at least one channel".into()));
        }
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "coupling is {}x{} for {n} channels",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        if centrifugal.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidParameter("centrifugal strengths must be non-negative".into()));
        }
        Ok(Self { centrifugal, coupling })
    }

    pub fn from_coupling(m: &CouplingMatrix) -> Self {
        Self { centrifugal: m.basis().centrifugal(), coupling: m.values().clone() }
    }

    pub fn uncoupled(centrifugal: Vec<f64>) -> Self {
        let n = centrifugal.len();
        Self::new(centrifugal, DMatrix::zeros(n, n)).expect("uncoupled system is valid")
    }

    pub fn dim(&self) -> usize {
        self.centrifugal.len()
    }

    pub fn centrifugal(&self) -> &[f64] {
        &self.centrifugal
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    /// `ν ≥ 0` with `ν(ν+1)` equal to the centrifugal strength.
    pub fn nu(&self, i: usize) -> f64 {
        0.5 * ((1.0 + 4.0 * self.centrifugal[i]).sqrt() - 1.0)
    }

    /// `W(ρ) = diag(1 - ν(ν+1)/ρ²) + 2α/ρ`, so that `F'' = -W F`.
    pub fn w_block<T: Real>(&self, rho: T) -> Block<T> {
        let n = self.dim();
        let inv = T::one() / rho;
        let two_inv = T::from(2.0) * inv;
        Block::from_fn(n, |i, j| {
            let mut v = T::from(self.coupling[(i, j)]) * two_inv;
            if i == j {
                v = v + T::one() - T::from(self.centrifugal[i]) * inv * inv;
            }
            v
        })
    }
}

/// Propagation settings that do not belong to the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOptions {
    pub taylor_order: usize,
    /// Outer nodes retained at the end of the march.
    pub tail: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { taylor_order: DEFAULT_TAYLOR_ORDER, tail: 2 }
    }
}

/// Independent regular solutions on the composite grid.
///
/// Columns are solutions, rows channels. Inner values are tabulated on every
/// inner node; the outer region keeps only its last few nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub grid: RadialGrid,
    /// Nodes `0..=100` of the inner region plus the ghost nodes.
    pub inner: Vec<DMatrix<f64>>,
    /// Value and derivative at `P·Δ` as handed to the outer region.
    pub boundary: MatchPoint,
    /// Last outer nodes, ending at `P·R0`.
    pub tail: Vec<MatchPoint>,
    /// Condition number of the channel-value matrix at `P·R0`.
    pub condition: f64,
}

impl SolutionSet {
    pub fn at_r0(&self) -> &MatchPoint {
        self.tail.last().expect("tail is never empty")
    }

    /// Relative residual of the discrete inner equations at node `m`.
    pub fn inner_residual(&self, system: &RadialSystem, m: usize) -> f64 {
        let blocks: Vec<Block<f64>> = self.inner.iter().map(Block::from_dmatrix).collect();
        let g = self.grid;
        inner::stencil_residual(system, g.rho_step(), |k| g.inner_rho(k), &blocks, m)
    }

    /// Writes value and derivative at `P·Δ` and `P·R0` as CSV rows.
    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "rho", "channel", "column", "value", "derivative"])?;
        let points = [(INNER_INTERVALS, &self.boundary), (self.grid.node_count() - 1, self.at_r0())];
        for (node, p) in points {
            for j in 0..p.values.ncols() {
                for i in 0..p.values.nrows() {
                    w.write_record(&[
                        node.to_string(),
                        format!("{:.17e}", p.rho),
                        i.to_string(),
                        j.to_string(),
                        format!("{:.17e}", p.values[(i, j)]),
                        format!("{:.17e}", p.derivatives[(i, j)]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Power-series values on inner nodes `1..=6`, normalized to order one at node 6.
pub fn series_start(system: &RadialSystem, grid: &RadialGrid) -> Vec<DMatrix<f64>> {
    let series = FrobeniusSeries::new(system, grid.inner_rho(6));
    (1..=6).map(|k| series.eval(grid.inner_rho(k))).collect()
}

/// Marches the starts across `[0, P·Δ]` and returns all inner nodes
/// (including the ghost nodes) with the boundary value and derivative.
pub fn fd_inner_solve(
    system: &RadialSystem,
    grid: &RadialGrid,
    starts: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, MatchPoint)> {
    if starts.len() != 6 {
        return Err(Error::InvalidParameter(format!("expected 6 start nodes, got {}", starts.len())));
    }
    let n = system.dim();
    let mut f: Vec<Block<f64>> = vec![Block::zeros(n)];
    f.extend(starts.iter().map(Block::from_dmatrix));
    let last = INNER_INTERVALS + GHOST_NODES;
    inner::march(system, grid.rho_step(), |k| grid.inner_rho(k), &mut f, last, true)?;
    let d = inner::derivative(&f, INNER_INTERVALS, grid.rho_step());
    let mut boundary = MatchPoint {
        rho: grid.rho_delta(),
        values: f[INNER_INTERVALS].to_dmatrix(),
        derivatives: d.to_dmatrix(),
    };
    let mut nodes: Vec<DMatrix<f64>> = f.iter().map(Block::to_dmatrix).collect();
    // unit columns at Δ
    let scale = DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return 0.0;
        }
        let c = boundary.values.column(j).amax().max(boundary.derivatives.column(j).amax());
        if c > 0.0 {
            1.0 / c
        } else {
            1.0
        }
    });
    boundary.right_multiply(&scale);
    for m in nodes.iter_mut() {
        *m = &*m * &scale;
    }
    Ok((nodes, boundary))
}

pub fn taylor_outer_propagate(
    system: &RadialSystem,
    grid: &RadialGrid,
    boundary: MatchPoint,
    options: PropagatorOptions,
) -> Result<Vec<MatchPoint>> {
    let steps = grid.outer_steps();
    outer::propagate(
        system,
        boundary,
        (0..=steps).map(|k| grid.outer_rho(k)),
        options.taylor_order,
        Some(OUTER_STABILIZE_EVERY),
        options.tail,
    )
}

/// Full propagation from the origin to `P·R0`.
pub fn propagate(system: &RadialSystem, grid: &RadialGrid, options: PropagatorOptions) -> Result<SolutionSet> {
    let starts = series_start(system, grid);
    let (inner, boundary) = fd_inner_solve(system, grid, &starts)?;
    let tail = taylor_outer_propagate(system, grid, boundary.clone(), options)?;
    let end = tail.last().expect("propagation returns at least one node");
    let condition = condition_number(&end.values);
    debug!("propagated {} channels to rho = {:.3}, condition {:.3e}", system.dim(), end.rho, condition);
    Ok(SolutionSet { grid: *grid, inner, boundary, tail, condition })
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{ChannelBasis, Symmetry};
    use crate::coupling::coupling_matrix;

    fn default_system(sym: Symmetry, p: f64) -> RadialSystem {
        let m = coupling_matrix(&ChannelBasis::default_for(sym), p, 96).unwrap();
        RadialSystem::from_coupling(&m)
    }

    #[test]
    fn nu_roundtrip() {
        let sys = RadialSystem::uncoupled(vec![3.75, 0.0, 23.5 * 24.5]);
        assert_eq!(sys.nu(0), 1.5);
        assert_eq!(sys.nu(1), 0.0);
        assert!((sys.nu(2) - 23.5).abs() < 1e-13);
    }

    #[test]
    fn starts_full_rank() {
        for sym in [Symmetry::Singlet, Symmetry::Triplet] {
            let sys = default_system(sym, 2f64.sqrt());
            let grid = RadialGrid::new(0.0075, 5.0, 2f64.sqrt()).unwrap();
            let starts = series_start(&sys, &grid);
            let sv = starts[5].singular_values();
            assert!(sv.min() > 0.5, "{sv}");
        }
    }

    #[test]
    fn full_propagation_is_independent_and_consistent() {
        let p = 2f64.sqrt();
        let sys = default_system(Symmetry::Singlet, p);
        let grid = RadialGrid::new(0.01, 60.0, p).unwrap();
        let sol = propagate(&sys, &grid, PropagatorOptions::default()).unwrap();
        assert!(sol.condition < 1e12, "{:e}", sol.condition);
        for m in [10, 37, 64, 99] {
            let r = sol.inner_residual(&sys, m);
            assert!(r < 1e-9, "node {m}: {r:e}");
        }
        assert_eq!(sol.at_r0().rho, grid.rho_r0());
        assert_eq!(sol.boundary.rho, grid.rho_delta());
    }

    #[test]
    fn outer_continues_inner_boundary() {
        let p = 1.0;
        let sys = default_system(Symmetry::Triplet, p);
        let grid = RadialGrid::new(0.01, 3.0, p).unwrap();
        let starts = series_start(&sys, &grid);
        let (nodes, boundary) = fd_inner_solve(&sys, &grid, &starts).unwrap();
        assert_eq!(nodes[INNER_INTERVALS], boundary.values);
        let out = outer::propagate(&sys, boundary.clone(), [grid.rho_delta()], 10, None, 1).unwrap();
        assert_eq!(out[0], boundary);
    }

    #[test]
    fn deterministic() {
        let p = 3f64.sqrt();
        let sys = default_system(Symmetry::Triplet, p);
        let grid = RadialGrid::new(0.009, 20.0, p).unwrap();
        let a = propagate(&sys, &grid, PropagatorOptions::default()).unwrap();
        let b = propagate(&sys, &grid, PropagatorOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_rows() {
        let p = 1.0;
        let sys = default_system(Symmetry::Singlet, p);
        let grid = RadialGrid::new(0.01, 3.0, p).unwrap();
        let sol = propagate(&sys, &grid, PropagatorOptions::default()).unwrap();
        let mut buf = Vec::new();
        sol.write_checkpoint(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 36);
        assert!(text.starts_with("node,rho,channel,column,value,derivative"));
    }
}
