//! T-matrix tables and single differential cross-sections.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{AngularPoint, ChannelBasis, Symmetry};
use crate::error::{Error, Result};
use crate::matcher::AmplitudeVector;

/// Hydrogen ground-state binding energy in eV; one Rydberg.
pub const RYDBERG_EV: f64 = 13.6;

/// Samples per SDCS curve.
pub const DEFAULT_SAMPLES: usize = 80;

/// Total energy in Ry left after ionizing the ground state.
pub fn total_energy_ry(incident_ev: f64) -> f64 {
    // lands exactly on 1, 2, 3 for 27.2, 40.8, 54.4 eV
    incident_ev / RYDBERG_EV - 1.0
}

/// Scaled momentum `P` with `P²/2` the total energy in hartree.
pub fn momentum(total_ry: f64) -> f64 {
    total_ry.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPartition {
    /// Total energy, Ry.
    pub total: f64,
    /// Secondary-electron energy, Ry.
    pub secondary: f64,
    pub alpha0: f64,
    pub momentum: f64,
}

impl EnergyPartition {
    pub fn new(total: f64, secondary: f64) -> Result<Self> {
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParameter(format!("total energy must be positive, got {total}")));
        }
        if !(0.0..=total).contains(&secondary) {
            return Err(Error::InvalidParameter(format!("secondary energy {secondary} outside [0, {total}]")));
        }
        let alpha0 = if secondary == total {
            FRAC_PI_2
        } else {
            secondary.sqrt().atan2((total - secondary).sqrt())
        };
        Ok(Self { total, secondary, alpha0, momentum: momentum(total) })
    }

    pub fn from_fraction(total: f64, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!("energy fraction {fraction} outside [0, 1]")));
        }
        let secondary = if fraction == 1.0 { total } else { fraction * total };
        Self::new(total, secondary)
    }

    pub fn fraction(&self) -> f64 {
        self.secondary / self.total
    }
}

/// Which step length produced a table or curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepTag {
    Raw(f64),
    Corrected,
}

impl fmt::Display for StepTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepTag::Raw(h) => write!(f, "{h}"),
            StepTag::Corrected => f.write_str("corrected"),
        }
    }
}

impl std::str::FromStr for StepTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("corrected") {
            return Ok(StepTag::Corrected);
        }
        s.parse::<f64>()
            .map(StepTag::Raw)
            .map_err(|_| Error::InvalidParameter(format!("step tag '{s}' is neither a step length nor 'corrected'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TMatrixTable {
    pub entries: DMatrix<Complex64>,
    pub basis: ChannelBasis,
    /// Total energy, Ry.
    pub energy: f64,
    pub tag: StepTag,
}

impl TMatrixTable {
    pub fn symmetry(&self) -> Symmetry {
        self.basis.symmetry()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Row-major pair label, 1-based: `(0, 0) → 1`, `(0, 1) → 2`, ...
    pub fn pair_label(&self, i: usize, j: usize) -> usize {
        i * self.dim() + j + 1
    }

    pub fn pair_of_label(&self, label: usize) -> Option<(usize, usize)> {
        let n = self.dim();
        (1..=n * n).contains(&label).then(|| ((label - 1) / n, (label - 1) % n))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Same basis, energy and tag check used before combining tables.
    pub fn compatible(&self, other: &Self) -> bool {
        self.basis == other.basis && self.energy == other.energy
    }
}

/// `T_{nn'} = C(n) conj(C(n'))`.
pub fn tmatrix_table(c: &AmplitudeVector, basis: &ChannelBasis, tag: StepTag) -> Result<TMatrixTable> {
    let n = c.values.len();
    if n != basis.len() {
        return Err(Error::InvalidParameter(format!("{n} amplitudes for a {}-channel basis", basis.len())));
    }
    if basis.symmetry() != c.symmetry {
        return Err(Error::Metadata(format!("amplitudes are {}, basis is {}", c.symmetry, basis.symmetry())));
    }
    if c.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("amplitudes must be finite".into()));
    }
    let entries = DMatrix::from_fn(n, n, |i, j| c.values[i] * c.values[j].conj());
    Ok(TMatrixTable { entries, basis: basis.clone(), energy: c.energy, tag })
}

/// `|T|² = Σ T_{nn'} φ_n(α0) φ_n'(α0)`, real part of a Hermitian form.
pub fn t_mod_squared(t: &TMatrixTable, part: &EnergyPartition) -> Result<f64> {
    if (part.total - t.energy).abs() > 1e-12 * t.energy.abs() {
        return Err(Error::Metadata(format!("partition energy {} differs from table energy {}", part.total, t.energy)));
    }
    Ok(t_mod_squared_at(t, part.alpha0))
}

fn t_mod_squared_at(t: &TMatrixTable, alpha0: f64) -> f64 {
    let phi = t.basis.evaluate(AngularPoint::new(alpha0).expect("α0 is within [0, π/2]"));
    let n = t.dim();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            sum += t.entries[(i, j)].re * phi[i] * phi[j];
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdcsCurve {
    /// `(E_b/E, value in πa0²/Ry)`.
    pub samples: Vec<(f64, f64)>,
    pub symmetry: Symmetry,
    /// Total energy, Ry.
    pub energy: f64,
    pub tag: StepTag,
    pub kappa: f64,
}

impl SdcsCurve {
    /// Largest `|v(f) - v(1-f)| / max(|v(f)|, |v(1-f)|)` over mirrored sample pairs.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.samples.len();
        (0..n / 2)
            .map(|i| {
                let a = self.samples[i].1;
                let b = self.samples[n - 1 - i].1;
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    /// Points with the secondary energy in Ry on the x axis.
    pub fn energy_points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|&(f, v)| (f * self.energy, v)).collect()
    }
}

pub fn fraction_grid(num_samples: usize) -> Vec<f64> {
    (0..num_samples).map(|i| i as f64 / (num_samples - 1) as f64).collect()
}

pub fn sdcs_curve(t: &TMatrixTable, num_samples: usize, kappa: f64) -> Result<SdcsCurve> {
    if num_samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 SDCS samples, got {num_samples}")));
    }
    if !kappa.is_finite() {
        return Err(Error::InvalidParameter("kappa must be finite".into()));
    }
    let samples = fraction_grid(num_samples)
        .into_iter()
        .map(|f| {
            let part = EnergyPartition::from_fraction(t.energy, f)?;
            Ok((f, kappa * t_mod_squared(t, &part)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite SDCS value".into()));
    }
    Ok(SdcsCurve { samples, symmetry: t.symmetry(), energy: t.energy, tag: t.tag, kappa })
}
