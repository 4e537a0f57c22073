//! Matching at `P·R0` to Coulomb-distorted asymptotic waves.
//!
//! In the eigenbasis of `α` (charges `q_j`, rotation `Q`) the system reads
//! `G'' + (1 + 2Λ/ρ - M/ρ²) G = 0` with `M = Qᵀ diag(ν(ν+1)) Q`. Each
//! eigenchannel has the outgoing solution
//!
//! ```text
//! E_j(ρ) = e^{iθ_j} Σ_m a_m ρ^{-m},   θ_j = ρ + q_j ln 2ρ,   a_0 = e_j
//! [2(Λ - q_j) - 2im] a_m = -[(m-1)m - 2i q_j (m-1) - q_j² - i q_j - M] a_{m-1}
//! ```
//!
//! and the real pair `u_j = Im E_j`, `v_j = Re E_j` is sine-like and
//! cosine-like with `u_j' v_j - u_j v_j' → 1`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::Symmetry;
use crate::coupling::ChargeEigensystem;
use crate::error::{Error, Result};
use crate::propagator::{condition_number, MatchPoint, RadialSystem, SolutionSet};

/// Matching systems above this condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_TERMS: usize = 60;
const TERM_TOL: f64 = 1e-17;
/// Smallest retained term above which the series is considered unreliable.
const VALIDITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `sin θ/√θ'`, `cos θ/√θ'` per eigenchannel, dropping `ν(ν+1)/ρ²`.
    Leading,
    /// Full asymptotic vector series, truncated at its smallest term.
    Series,
}

/// Sine-like and cosine-like solutions per eigenchannel at one radius.
/// Column `j` of each matrix belongs to eigenchannel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticValues {
    pub rho: f64,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub du: DMatrix<f64>,
    pub dv: DMatrix<f64>,
    /// Size of the first omitted series term; zero for the leading form.
    pub remainder: f64,
}

impl AsymptoticValues {
    /// `u'ᵀ v - uᵀ v'`; the identity for exact, normalized solutions.
    pub fn wronskian(&self) -> DMatrix<f64> {
        self.du.transpose() * &self.v - self.u.transpose() * &self.dv
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticForm {
    charges: Vec<f64>,
    truncation: Truncation,
    /// `coeff[j][m]`, the vector `a_m` of eigenchannel `j`.
    coeff: Vec<Vec<DVector<Complex64>>>,
}

impl AsymptoticForm {
    pub fn new(eig: &ChargeEigensystem, centrifugal: &[f64], truncation: Truncation) -> Self {
        let n = eig.dim();
        let q = &eig.eigenvectors;
        let l = DMatrix::from_diagonal(&DVector::from_column_slice(centrifugal));
        let m_mat = (q.transpose() * l * q).map(|v| Complex64::new(v, 0.0));
        let charges = eig.eigenvalues.clone();
        let terms = match truncation {
            Truncation::Leading => 0,
            Truncation::Series => MAX_TERMS,
        };
        let i = Complex64::i();
        let coeff = (0..n)
            .map(|j| {
                let qj = charges[j];
                let mut a = vec![DVector::from_fn(n, |k, _| if k == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })];
                for m in 1..=terms {
                    let mf = m as f64;
                    let scalar = Complex64::new((mf - 1.0) * mf - qj * qj, 0.0) - i * (2.0 * qj * (mf - 1.0) + qj);
                    let prev = &a[m - 1];
                    let rhs = -(prev * scalar - &m_mat * prev);
                    let next = DVector::from_fn(n, |k, _| rhs[k] / (Complex64::new(2.0 * (charges[k] - qj), 0.0) - i * (2.0 * mf)));
                    a.push(next);
                }
                a
            })
            .collect();
        Self { charges, truncation, coeff }
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn evaluate(&self, rho: f64) -> AsymptoticValues {
        let n = self.charges.len();
        let mut u = DMatrix::zeros(n, n);
        let mut v = DMatrix::zeros(n, n);
        let mut du = DMatrix::zeros(n, n);
        let mut dv = DMatrix::zeros(n, n);
        let mut remainder = 0.0f64;
        let i = Complex64::i();
        for j in 0..n {
            let qj = self.charges[j];
            let theta = rho + qj * (2.0 * rho).ln();
            let dtheta = 1.0 + qj / rho;
            let phase = Complex64::from_polar(1.0, theta);
            let (w, dw) = match self.truncation {
                Truncation::Leading => {
                    let amp = 1.0 / dtheta.sqrt();
                    let damp = 0.5 * qj / (rho * rho) * dtheta.powf(-1.5);
                    let e = &self.coeff[j][0];
                    (e * Complex64::new(amp, 0.0), e * Complex64::new(damp, 0.0))
                }
                Truncation::Series => {
                    let (w, dw, rest) = self.sum_series(j, rho);
                    remainder = remainder.max(rest);
                    (w, dw)
                }
            };
            let e = &w * phase;
            let de = (&w * (i * dtheta) + dw) * phase;
            for k in 0..n {
                u[(k, j)] = e[k].im;
                v[(k, j)] = e[k].re;
                du[(k, j)] = de[k].im;
                dv[(k, j)] = de[k].re;
            }
        }
        if remainder > VALIDITY_TOL {
            warn!("asymptotic series at rho = {rho:.3} leaves a remainder of {remainder:.2e}; increase R0");
        }
        AsymptoticValues { rho, u, v, du, dv, remainder }
    }

    /// Partial sums of `w` and `w'` up to the smallest term.
    fn sum_series(&self, j: usize, rho: f64) -> (DVector<Complex64>, DVector<Complex64>, f64) {
        let a = &self.coeff[j];
        let mut w = a[0].clone();
        let mut dw = DVector::zeros(a[0].len());
        let mut last = 1.0f64;
        let inv = 1.0 / rho;
        let mut pw = 1.0;
        for (m, am) in a.iter().enumerate().skip(1) {
            pw *= inv;
            let size = am.norm() * pw;
            if size >= last {
                return (w, dw, size);
            }
            w += am * Complex64::new(pw, 0.0);
            dw += am * Complex64::new(-(m as f64) * pw * inv, 0.0);
            last = size;
            if size < TERM_TOL {
                return (w, dw, 0.0);
            }
        }
        (w, dw, last)
    }
}

/// Real coefficients `[A; B]` with `G = U A + V B` and `G' = U' A + V' B`,
/// `G = Qᵀ F`, for every column of the solution set.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatch {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub condition: f64,
}

pub fn to_eigenbasis(eig: &ChargeEigensystem, f: &DMatrix<f64>) -> DMatrix<f64> {
    eig.eigenvectors.transpose() * f
}

pub fn from_eigenbasis(eig: &ChargeEigensystem, g: &DMatrix<f64>) -> DMatrix<f64> {
    &eig.eigenvectors * g
}

pub fn match_columns(point: &MatchPoint, eig: &ChargeEigensystem, form: &AsymptoticForm) -> Result<ColumnMatch> {
    let n = eig.dim();
    let cols = point.values.ncols();
    let asy = form.evaluate(point.rho);
    let g = to_eigenbasis(eig, &point.values);
    let gp = to_eigenbasis(eig, &point.derivatives);
    let mut sys = DMatrix::zeros(2 * n, 2 * n);
    sys.view_mut((0, 0), (n, n)).copy_from(&asy.u);
    sys.view_mut((0, n), (n, n)).copy_from(&asy.v);
    sys.view_mut((n, 0), (n, n)).copy_from(&asy.du);
    sys.view_mut((n, n), (n, n)).copy_from(&asy.dv);
    let mut rhs = DMatrix::zeros(2 * n, cols);
    rhs.rows_mut(0, n).copy_from(&g);
    rhs.rows_mut(n, n).copy_from(&gp);
    let condition = condition_number(&sys);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let sol = sys.lu().solve(&rhs).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    Ok(ColumnMatch { a: sol.rows(0, n).into_owned(), b: sol.rows(n, n).into_owned(), condition })
}

/// `S = (A + iB)(A - iB)^{-1}` in the eigenbasis: with `F (A - iB)^{-1}`
/// the solutions become `(E S - Ē)/(2i)`, unit incoming wave per channel.
pub fn s_matrix(m: &ColumnMatch) -> Result<DMatrix<Complex64>> {
    let i = Complex64::i();
    let ac = m.a.map(|v| Complex64::new(v, 0.0));
    let bc = m.b.map(|v| Complex64::new(v, 0.0));
    let plus = &ac + &bc * i;
    let minus = &ac - &bc * i;
    if m.a.ncols() != m.a.nrows() {
        return Err(Error::InvalidParameter("S-matrix needs as many solutions as channels".into()));
    }
    let sv = minus.clone().singular_values();
    let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let inv = minus.try_inverse().ok_or(Error::IllConditioned { condition })?;
    Ok(plus * inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Channel index whose S-matrix column gives the amplitudes.
    pub entrance: usize,
    pub truncation: Truncation,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { entrance: 0, truncation: Truncation::Series }
    }
}

/// Channel amplitudes `C(n)` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    pub values: Vec<Complex64>,
    pub symmetry: Symmetry,
    /// Total energy in Ry.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// S-matrix in the channel basis, `Q S_eig Qᵀ`.
    pub s_channel: DMatrix<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub condition: f64,
    /// `max |S†S - I|`.
    pub unitarity_defect: f64,
    pub remainder: f64,
}

impl MatchResult {
    pub fn amplitude_vector(&self, symmetry: Symmetry, energy: f64) -> AmplitudeVector {
        AmplitudeVector { values: self.amplitudes.clone(), symmetry, energy }
    }
}

pub fn extract_amplitudes(
    sol: &SolutionSet,
    eig: &ChargeEigensystem,
    system: &RadialSystem,
    options: MatchOptions,
) -> Result<MatchResult> {
    let n = eig.dim();
    if options.entrance >= n {
        return Err(Error::InvalidParameter(format!("entrance channel {} outside {n} channels", options.entrance)));
    }
    let form = AsymptoticForm::new(eig, system.centrifugal(), options.truncation);
    let point = sol.at_r0();
    let cm = match_columns(point, eig, &form)?;
    let s_eig = s_matrix(&cm)?;
    let q = eig.eigenvectors.map(|v| Complex64::new(v, 0.0));
    let s_channel = &q * &s_eig * q.transpose();
    let defect = (s_channel.adjoint() * &s_channel - DMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let amplitudes = s_channel.column(options.entrance).iter().cloned().collect();
    Ok(MatchResult {
        s_channel,
        amplitudes,
        condition: cm.condition,
        unitarity_defect: defect,
        remainder: form.evaluate(point.rho).remainder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::symmetric_eigensystem;
    use std::f64::consts::PI;

    fn eig_of(values: &[f64], n: usize) -> ChargeEigensystem {
        symmetric_eigensystem(&DMatrix::from_row_slice(n, n, values)).unwrap()
    }

    #[test]
    fn free_limit_is_sine_and_cosine() {
        let eig = eig_of(&[0.0], 1);
        for t in [Truncation::Leading, Truncation::Series] {
            let form = AsymptoticForm::new(&eig, &[0.0], t);
            let a = form.evaluate(7.3);
            assert_eq!(a.u[(0, 0)], 7.3f64.sin());
            assert_eq!(a.v[(0, 0)], 7.3f64.cos());
            assert_eq!(a.du[(0, 0)], 7.3f64.cos());
            assert_eq!(a.dv[(0, 0)], -(7.3f64.sin()));
        }
    }

    #[test]
    fn wronskian_is_one() {
        let eig = eig_of(&[0.8, 0.1, 0.1, -0.5], 2);
        let l = [3.75, 9.5 * 10.5];
        for t in [Truncation::Leading, Truncation::Series] {
            let form = AsymptoticForm::new(&eig, &l, t);
            for k in 0..10 {
                let rho = 400.0 + 37.7 * k as f64;
                let w = form.evaluate(rho).wronskian();
                if t == Truncation::Series {
                    assert!((w - DMatrix::identity(2, 2)).abs().max() < 1e-10);
                } else {
                    for j in 0..2 {
                        assert!((w[(j, j)] - 1.0).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn leading_form_residual_is_second_order() {
        // F'' + (1 + 2q/ρ) F by a five-point difference at ρ = 3000
        let q = 0.7;
        let nu = 5.5f64;
        let eig = eig_of(&[q], 1);
        let form = AsymptoticForm::new(&eig, &[0.0], Truncation::Leading);
        let rho = 3000.0;
        let d = 0.05;
        let f = |r: f64| form.evaluate(r).u[(0, 0)];
        let f2 = (-f(rho + 2.0 * d) + 16.0 * f(rho + d) - 30.0 * f(rho) + 16.0 * f(rho - d) - f(rho - 2.0 * d))
            / (12.0 * d * d);
        let res = (f2 + (1.0 + 2.0 * q / rho) * f(rho)).abs();
        assert!(res < (q * q + q * nu * nu) / (rho * rho), "{res:e}");
    }

    #[test]
    fn series_solves_the_coupled_equation() {
        let a = [0.6, 0.2, 0.2, -0.4];
        let l = [3.75, 5.5 * 6.5];
        let eig = eig_of(&a, 2);
        let form = AsymptoticForm::new(&eig, &l, Truncation::Series);
        let am = DMatrix::from_row_slice(2, 2, &a);
        let q = &eig.eigenvectors;
        let rho = 200.0;
        let h = 1e-3;
        // channel-space u = Q U; check u'' + (1 - L/ρ²) u + (2/ρ) α u ≈ 0
        let u = |r: f64| q * form.evaluate(r).u;
        let upp = (u(rho + h) - u(rho) * 2.0 + u(rho - h)) / (h * h);
        let lmat = DMatrix::from_diagonal(&DVector::from_column_slice(&l));
        let w = DMatrix::identity(2, 2) - lmat / (rho * rho) + am * (2.0 / rho);
        let res = (upp + w * u(rho)).abs().max();
        assert!(res < 1e-6, "{res:e}");
    }

    #[test]
    fn sine_fed_channel_gives_unit_a() {
        let eig = eig_of(&[0.0], 1);
        let form = AsymptoticForm::new(&eig, &[0.0], Truncation::Series);
        let rho = 55.5;
        let p = MatchPoint {
            rho,
            values: DMatrix::from_element(1, 1, rho.sin()),
            derivatives: DMatrix::from_element(1, 1, rho.cos()),
        };
        let m = match_columns(&p, &eig, &form).unwrap();
        assert!((m.a[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(m.b[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn eigenbasis_roundtrip() {
        let eig = eig_of(&[0.6, 0.2, 0.1, 0.2, -0.4, 0.3, 0.1, 0.3, 0.9], 3);
        let f = DMatrix::from_fn(3, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 0.7));
        let back = from_eigenbasis(&eig, &to_eigenbasis(&eig, &f));
        assert!((back - f).abs().max() < 1e-12);
    }

    #[test]
    fn free_channel_s_matrix_phase() {
        // √ρ J_{ν+1/2} → sin(ρ - νπ/2): S = e^{-iνπ}
        let nu = 1.5f64;
        let eig = eig_of(&[0.0], 1);
        let form = AsymptoticForm::new(&eig, &[nu * (nu + 1.0)], Truncation::Series);
        let rho = 300.0;
        let asy = form.evaluate(rho);
        // feed the exact regular solution built from the same series
        let (c, s) = ((nu * PI / 2.0).cos(), (nu * PI / 2.0).sin());
        let p = MatchPoint {
            rho,
            values: DMatrix::from_element(1, 1, c * asy.u[(0, 0)] - s * asy.v[(0, 0)]),
            derivatives: DMatrix::from_element(1, 1, c * asy.du[(0, 0)] - s * asy.dv[(0, 0)]),
        };
        let m = match_columns(&p, &eig, &form).unwrap();
        let smat = s_matrix(&m).unwrap();
        let want = Complex64::from_polar(1.0, -nu * PI);
        assert!((smat[(0, 0)] - want).norm() < 1e-13);
    }

    #[test]
    fn degenerate_columns_rejected() {
        let eig = eig_of(&[0.0, 0.0, 0.0, 0.0], 2);
        let form = AsymptoticForm::new(&eig, &[0.0, 0.0], Truncation::Series);
        let p = MatchPoint {
            rho: 10.0,
            values: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]),
            derivatives: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]),
        };
        let m = match_columns(&p, &eig, &form).unwrap();
        assert!(matches!(s_matrix(&m), Err(Error::IllConditioned { .. })));
    }
}
