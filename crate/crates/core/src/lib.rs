//! Coupled-channel hyperspherical partial-wave solver for the Temkin-Poet
//! model of electron-impact ionization of hydrogen.
//!
//! The pipeline runs basis -> coupling -> propagator -> matcher ->
//! observables, repeated at three step lengths, followed by the two-term
//! step-size correction in [`extrapolation`] and the curve models in
//! [`fitting`].

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod convergence;
pub mod coupling;
pub mod error;
pub mod extrapolation;
pub mod fitting;
pub mod io;
pub mod matcher;
pub mod observables;
pub mod pipeline;
pub mod propagator;
pub mod quadrature;
pub mod real;

pub use basis::{AngularPoint, ChannelBasis, Symmetry};
pub use coupling::{ChargeEigensystem, CouplingMatrix};
pub use error::{Error, Result};
pub use matcher::AmplitudeVector;
pub use propagator::{RadialGrid, RadialSystem, SolutionSet};
pub use observables::{EnergyPartition, SdcsCurve, StepTag, TMatrixTable};
pub use extrapolation::{CorrectedTable, StepTriple};
pub use fitting::{DataSet, FitModel, FitReport, ModelSpec};
pub use pipeline::{prepare, Prepared, RunOutput, SolveConfig};
