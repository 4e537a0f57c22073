//! Channel coupling for the cusp (Temkin-Poet) potential.
//!
//! The stored matrix carries the minus sign and the `1/P` factor, so the
//! radial system reads `F'' + (1 - ν(ν+1)/ρ²) F + (2/ρ) α F = 0`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;

use crate::basis::{AngularPoint, ChannelBasis};
use crate::error::{Error, Result};
use crate::quadrature::Rule;

/// Net angular Coulomb interaction `C(α) = -1/cos α - 1/sin α + 1/max(cos α, sin α)`.
pub fn cusp_potential(p: AngularPoint) -> Result<f64> {
    let a = p.alpha();
    if a <= 0.0 || a >= FRAC_PI_2 {
        return Err(Error::InvalidParameter(format!(
            "cusp potential is singular at the endpoint α = {a}"
        )));
    }
    Ok(cusp_unchecked(a))
}

fn cusp_unchecked(a: f64) -> f64 {
    let (s, c) = a.sin_cos();
    -1.0 / c - 1.0 / s + 1.0 / c.max(s)
}

/// How the angular integral treats the derivative kink of `C` at `π/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panels {
    /// Two panels meeting at `π/4`.
    SplitAtCusp,
    /// One panel over `[0, π/2]`; only useful to demonstrate the kink.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    values: DMatrix<f64>,
    momentum: f64,
    basis: ChannelBasis,
}

impl CouplingMatrix {
    /// Builds a matrix from explicit values; used for model systems.
    pub fn from_values(basis: ChannelBasis, momentum: f64, values: DMatrix<f64>) -> Result<Self> {
        let n = basis.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix is {}x{}, basis has {n} channels",
                values.nrows(),
                values.ncols()
            )));
        }
        if (values.clone() - values.transpose()).abs().max() > 0.0 {
            return Err(Error::InvalidParameter("coupling matrix must be symmetric".into()));
        }
        Ok(Self { values, momentum, basis })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn basis(&self) -> &ChannelBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Same basis with every coupling switched off.
    pub fn zeroed(&self) -> Self {
        Self { values: DMatrix::zeros(self.dim(), self.dim()), ..self.clone() }
    }
}

/// Angular matrix elements `<φ_n|C|φ_n'>` with the measure `sin²α cos²α dα (4π)²`.
pub fn potential_elements(basis: &ChannelBasis, quad_order: usize, panels: Panels) -> Result<DMatrix<f64>> {
    let rule = Rule::new(quad_order)?;
    let n = basis.len();
    let ranges: &[(f64, f64)] = match panels {
        Panels::SplitAtCusp => &[(0.0, FRAC_PI_4), (FRAC_PI_4, FRAC_PI_2)],
        Panels::Single => &[(0.0, FRAC_PI_2)],
    };
    let scale = (4.0 * PI).powi(2);
    let mut m = DMatrix::zeros(n, n);
    for &(a, b) in ranges {
        for (alpha, w) in rule.panel(a, b) {
            let vals = basis.evaluate(AngularPoint::new(alpha)?);
            let weight = w * (alpha.sin() * alpha.cos()).powi(2) * cusp_unchecked(alpha) * scale;
            for i in 0..n {
                for j in i..n {
                    m[(i, j)] += weight * vals[i] * vals[j];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    Ok(m)
}

pub fn coupling_matrix(basis: &ChannelBasis, momentum: f64, quad_order: usize) -> Result<CouplingMatrix> {
    if !(momentum > 0.0) || !momentum.is_finite() {
        return Err(Error::InvalidParameter(format!("momentum must be positive, got {momentum}")));
    }
    if quad_order < 32 {
        return Err(Error::InvalidParameter(format!("quadrature order must be at least 32, got {quad_order}")));
    }
    let elements = potential_elements(basis, quad_order, Panels::SplitAtCusp)?;
    let values = elements.map(|v| -v / momentum);
    Ok(CouplingMatrix { values, momentum, basis: basis.clone() })
}

/// Effective asymptotic charges and the rotation into their eigenchannels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeEigensystem {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, ordered like `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl ChargeEigensystem {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

pub fn charge_eigensystem(m: &CouplingMatrix) -> Result<ChargeEigensystem> {
    symmetric_eigensystem(m.values())
}

/// Eigenvalues descending; each eigenvector's largest-magnitude entry positive.
pub fn symmetric_eigensystem(values: &DMatrix<f64>) -> Result<ChargeEigensystem> {
    let n = values.nrows();
    let eig = values
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::EigenFailure(format!("{values}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut vectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() + 1e-12 {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(ChargeEigensystem { eigenvalues, eigenvectors: vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Symmetry;

    #[test]
    fn cusp_examples() {
        let v = cusp_potential(AngularPoint::new(FRAC_PI_4).unwrap()).unwrap();
        assert!((v + 2f64.sqrt()).abs() < 1e-14);
        let v = cusp_potential(AngularPoint::new(PI / 6.0).unwrap()).unwrap();
        assert!((v + 2.0).abs() < 1e-14);
        assert!(cusp_potential(AngularPoint::new(0.0).unwrap()).is_err());
        assert!(cusp_potential(AngularPoint::new(FRAC_PI_2).unwrap()).is_err());
    }

    #[test]
    fn cusp_exchange_symmetric() {
        for k in 1..50 {
            let p = AngularPoint::new(k as f64 * FRAC_PI_2 / 50.0).unwrap();
            let a = cusp_potential(p).unwrap();
            let b = cusp_potential(p.reflected()).unwrap();
            assert!((a - b).abs() <= 1e-13 * a.abs());
        }
    }

    #[test]
    fn non_positive_momentum_rejected() {
        let basis = ChannelBasis::default_for(Symmetry::Singlet);
        assert!(coupling_matrix(&basis, 0.0, 96).is_err());
        assert!(coupling_matrix(&basis, -1.0, 96).is_err());
        assert!(coupling_matrix(&basis, 1.0, 16).is_err());
    }

    #[test]
    fn single_channel_eigensystem() {
        let basis = ChannelBasis::new(Symmetry::Singlet, vec![0]).unwrap();
        let m = coupling_matrix(&basis, 1.0, 64).unwrap();
        let e = charge_eigensystem(&m).unwrap();
        assert_eq!(e.eigenvalues, vec![m.values()[(0, 0)]]);
        assert_eq!(e.eigenvectors[(0, 0)], 1.0);
    }

    #[test]
    fn eigensystem_sorted_and_orthogonal() {
        for sym in [Symmetry::Singlet, Symmetry::Triplet] {
            let m = coupling_matrix(&ChannelBasis::default_for(sym), 1.3, 96).unwrap();
            let e = charge_eigensystem(&m).unwrap();
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let q = &e.eigenvectors;
            let ortho = (q.transpose() * q - DMatrix::identity(6, 6)).abs().max();
            assert!(ortho < 1e-12, "{ortho:e}");
            let recon = (e.reconstruct() - m.values()).abs().max();
            assert!(recon < 1e-12, "{recon:e}");
            for j in 0..6 {
                let col = q.column(j);
                let lead = col.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
                assert!(lead > 0.0);
            }
        }
    }

    // adaptive quadrature (scipy quad, rel 1e-13) on both panels
    const GOLDEN: [((usize, usize), f64); 3] =
        [((0, 0), 2.19488369775096), ((0, 1), 0.9759718382363524), ((1, 1), 3.6489193392678976)];

    #[test]
    fn golden_singlet_elements() {
        let m = coupling_matrix(&ChannelBasis::default_for(Symmetry::Singlet), 1.0, 96).unwrap();
        for ((i, j), v) in GOLDEN {
            assert!((m.values()[(i, j)] - v).abs() < 1e-12, "({i},{j}) {}", m.values()[(i, j)]);
        }
        let closed = 32.0 / (3.0 * PI) * (1.0 - 1.0 / (2.0 * 2f64.sqrt()));
        assert!((m.values()[(0, 0)] - closed).abs() < 1e-13);
    }

    #[test]
    fn triplet_golden_elements() {
        let m = coupling_matrix(&ChannelBasis::default_for(Symmetry::Triplet), 1.0, 96).unwrap();
        assert!((m.values()[(0, 0)] - 3.1708555359873123).abs() < 1e-12);
        assert!((m.values()[(0, 1)] - 1.4540356415169386).abs() < 1e-12);
    }

    #[test]
    fn exact_symmetry_and_scaling() {
        for sym in [Symmetry::Singlet, Symmetry::Triplet] {
            let basis = ChannelBasis::default_for(sym);
            let one = coupling_matrix(&basis, 1.0, 96).unwrap();
            let two = coupling_matrix(&basis, 2.0, 96).unwrap();
            let v = one.values();
            assert_eq!(v, &v.transpose());
            for (a, b) in one.values().iter().zip(two.values().iter()) {
                assert!((0.5 * a - b).abs() <= 1e-15 * a.abs());
            }
        }
    }

    #[test]
    fn quadrature_refinement_stable() {
        for sym in [Symmetry::Singlet, Symmetry::Triplet] {
            let basis = ChannelBasis::default_for(sym);
            let lo = coupling_matrix(&basis, 1.0, 64).unwrap();
            let hi = coupling_matrix(&basis, 1.0, 128).unwrap();
            let d = (lo.values() - hi.values()).abs().max();
            assert!(d < 1e-11, "{d:e}");
            let e96 = charge_eigensystem(&coupling_matrix(&basis, 1.0, 96).unwrap()).unwrap();
            let e128 = charge_eigensystem(&hi).unwrap();
            for (a, b) in e96.eigenvalues.iter().zip(&e128.eigenvalues) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_panels_converge_faster() {
        let basis = ChannelBasis::default_for(Symmetry::Singlet);
        let reference = potential_elements(&basis, 128, Panels::SplitAtCusp).unwrap();
        let err = |order, panels| (potential_elements(&basis, order, panels).unwrap() - &reference).abs().max();
        let split = err(24, Panels::SplitAtCusp);
        let single = err(48, Panels::Single);
        assert!(split < 1e-12, "{split:e}");
        assert!(single > 1e3 * split, "single {single:e} split {split:e}");
        assert!(err(96, Panels::Single) < single);
    }
}
