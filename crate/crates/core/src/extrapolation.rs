//! Two-term step-length error correction.
//!
//! The error of a step-`h` result is modelled as `A h'^p + B h'^(p+2)` with
//! `h' = h / unit`. Three runs fix `A` and `B` from the differences
//! `ΔT₂₁ = T(h₂) - T(h₁)` and `ΔT₃₂ = T(h₃) - T(h₂)`, and the corrected value
//! is `T* = T(h₁) - A h₁'^p - B h₁'^(p+2)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observables::{StepTag, TMatrixTable};

pub const DEFAULT_UNIT: f64 = 0.005;
pub const DEFAULT_STEPS: [f64; 3] = [0.0075, 0.009, 0.01];
pub const DEFAULT_EXPONENT: i32 = 8;

/// Relative tolerance when matching a table's step length to a triple.
const STEP_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTriple {
    h: [f64; 3],
    unit: f64,
}

impl StepTriple {
    pub fn new(h: [f64; 3], unit: f64) -> Result<Self> {
        if !(unit > 0.0) || !unit.is_finite() {
            return Err(Error::InvalidSteps(format!("unit must be positive, got {unit}")));
        }
        if h.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidSteps(format!("step lengths must be positive, got {h:?}")));
        }
        if !(h[0] < h[1] && h[1] < h[2]) {
            return Err(Error::InvalidSteps(format!(
                "step lengths must satisfy 0 < h1 < h2 < h3, got {} {} {}",
                h[0], h[1], h[2]
            )));
        }
        Ok(Self { h, unit })
    }

    pub fn standard() -> Self {
        Self { h: DEFAULT_STEPS, unit: DEFAULT_UNIT }
    }

    pub fn steps(&self) -> [f64; 3] {
        self.h
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn with_unit(&self, unit: f64) -> Result<Self> {
        Self::new(self.h, unit)
    }

    /// Steps divided by the unit.
    pub fn scaled(&self) -> [f64; 3] {
        self.h.map(|x| x / self.unit)
    }
}

/// Coefficients of `ΔT₂₁` and `ΔT₃₂` in `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub a21: f64,
    pub a32: f64,
    pub b21: f64,
    pub b32: f64,
}

impl Weights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.a21, self.a32, self.b21, self.b32]
    }
}

pub fn extrapolation_weights(steps: &StepTriple, p: i32) -> Result<Weights> {
    if p < 1 {
        return Err(Error::InvalidParameter(format!("error exponent must be positive, got {p}")));
    }
    let h = steps.scaled();
    let lo = h.map(|x| x.powi(p));
    let hi = h.map(|x| x.powi(p + 2));
    let d = (lo[1] - lo[0]) * (hi[2] - hi[1]) - (lo[2] - lo[1]) * (hi[1] - hi[0]);
    let scale = (lo[1] - lo[0]).abs() * (hi[2] - hi[1]).abs() + (lo[2] - lo[1]).abs() * (hi[1] - hi[0]).abs();
    if !d.is_finite() || d.abs() <= 1e-14 * scale || d == 0.0 {
        return Err(Error::InvalidSteps(format!(
            "degenerate step choice {:?}: correction denominator is {d:e}",
            steps.steps()
        )));
    }
    Ok(Weights {
        a21: (hi[2] - hi[1]) / d,
        a32: -(hi[1] - hi[0]) / d,
        b21: -(lo[2] - lo[1]) / d,
        b32: (lo[1] - lo[0]) / d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub tstar: Complex64,
    /// Per `(h/unit)^p`.
    pub a: Complex64,
    /// Per `(h/unit)^(p+2)`.
    pub b: Complex64,
}

fn apply(t: [Complex64; 3], w: &Weights, h1: f64, p: i32) -> Correction {
    let d21 = t[1] - t[0];
    let d32 = t[2] - t[1];
    let a = d21 * w.a21 + d32 * w.a32;
    let b = d21 * w.b21 + d32 * w.b32;
    let tstar = t[0] - a * h1.powi(p) - b * h1.powi(p + 2);
    Correction { tstar, a, b }
}

pub fn two_term_correct(t: [Complex64; 3], steps: &StepTriple, p: i32) -> Result<Correction> {
    let w = extrapolation_weights(steps, p)?;
    Ok(apply(t, &w, steps.scaled()[0], p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub exponent: i32,
    pub unit: f64,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
}

impl ErrorModel {
    /// Modelled error `A h'^p + B h'^(p+2)` at step `h` (a.u.).
    pub fn error_at(&self, h: f64) -> DMatrix<Complex64> {
        let x = h / self.unit;
        let lo = x.powi(self.exponent);
        let hi = x.powi(self.exponent + 2);
        self.a.map(|z| z * lo) + self.b.map(|z| z * hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedTable {
    pub table: TMatrixTable,
    pub model: ErrorModel,
    pub steps: StepTriple,
    pub sources: [TMatrixTable; 3],
}

impl CorrectedTable {
    /// Largest relative spread of `T(h_i) - E(h_i)` across the three runs.
    pub fn reconstruction_defect(&self) -> f64 {
        let rebuilt: Vec<DMatrix<Complex64>> = self
            .sources
            .iter()
            .zip(self.steps.steps())
            .map(|(t, h)| &t.entries - self.model.error_at(h))
            .collect();
        let mut worst = 0.0f64;
        for (k, z) in self.table.entries.iter().enumerate() {
            let scale = z.norm().max(f64::MIN_POSITIVE);
            for r in &rebuilt {
                worst = worst.max((r[k] - z).norm() / scale);
            }
        }
        worst
    }
}

fn check_tag(table: &TMatrixTable, h: f64) -> Result<()> {
    match table.tag {
        StepTag::Raw(t) if (t - h).abs() <= STEP_MATCH_TOL * h => Ok(()),
        other => Err(Error::Metadata(format!("expected a table at h = {h}, found {other}"))),
    }
}

pub fn correct_table(tables: &[TMatrixTable; 3], steps: &StepTriple, p: i32) -> Result<CorrectedTable> {
    let w = extrapolation_weights(steps, p)?;
    let first = &tables[0];
    for (t, h) in tables.iter().zip(steps.steps()) {
        check_tag(t, h)?;
        if t.basis != first.basis {
            return Err(Error::Metadata(format!(
                "basis mismatch: {} {:?} vs {} {:?}",
                first.symmetry(),
                first.basis.degrees(),
                t.symmetry(),
                t.basis.degrees()
            )));
        }
        if t.energy != first.energy {
            return Err(Error::Metadata(format!("energy mismatch: {} Ry vs {} Ry", first.energy, t.energy)));
        }
    }
    let h1 = steps.scaled()[0];
    let n = first.dim();
    let mut tstar = DMatrix::zeros(n, n);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let c = apply([tables[0].entries[(i, j)], tables[1].entries[(i, j)], tables[2].entries[(i, j)]], &w, h1, p);
            tstar[(i, j)] = c.tstar;
            a[(i, j)] = c.a;
            b[(i, j)] = c.b;
        }
    }
    Ok(CorrectedTable {
        table: TMatrixTable { entries: tstar, basis: first.basis.clone(), energy: first.energy, tag: StepTag::Corrected },
        model: ErrorModel { exponent: p, unit: steps.unit(), a, b },
        steps: *steps,
        sources: tables.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{ChannelBasis, Symmetry};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn triple_validation() {
        assert!(StepTriple::new([0.01, 0.01, 0.02], DEFAULT_UNIT).is_err());
        assert!(StepTriple::new([0.02, 0.01, 0.03], DEFAULT_UNIT).is_err());
        assert!(StepTriple::new([0.0, 0.01, 0.03], DEFAULT_UNIT).is_err());
        assert!(StepTriple::new([0.01, 0.02, 0.03], 0.0).is_err());
        let s = StepTriple::standard();
        let h = s.scaled();
        assert!((h[0] - 1.5).abs() < 1e-15 && (h[1] - 1.8).abs() < 1e-15 && h[2] == 2.0);
    }

    #[test]
    fn constant_data_is_untouched() {
        let t = c(0.3, -0.2);
        let r = two_term_correct([t; 3], &StepTriple::standard(), 8).unwrap();
        assert_eq!(r.a, c(0.0, 0.0));
        assert_eq!(r.b, c(0.0, 0.0));
        assert_eq!(r.tstar, t);
    }

    #[test]
    fn planted_model_recovered() {
        let steps = StepTriple::standard();
        let t = steps.scaled().map(|h| c(7.0 + 3.0 * h.powi(8) - 2.0 * h.powi(10), 0.0));
        let r = two_term_correct(t, &steps, 8).unwrap();
        assert!(rel(r.tstar, c(7.0, 0.0)) < 1e-10);
        assert!(rel(r.a, c(3.0, 0.0)) < 1e-10);
        assert!(rel(r.b, c(-2.0, 0.0)) < 1e-10);
    }

    #[test]
    fn quadratic_weights_match_direct_solve() {
        // p = 2, h' = 1, 2, 3: A(h2²-h1²) + B(h2⁴-h1⁴) = ΔT₂₁ etc.
        let steps = StepTriple::new([1.0, 2.0, 3.0], 1.0).unwrap();
        let w = extrapolation_weights(&steps, 2).unwrap();
        // [[3, 15], [5, 65]] has inverse [[65, -15], [-5, 3]] / 120
        let want = [65.0 / 120.0, -15.0 / 120.0, -5.0 / 120.0, 3.0 / 120.0];
        for (g, e) in w.as_array().iter().zip(want) {
            assert!((g - e).abs() < 1e-15, "{g} {e}");
        }
    }

    #[test]
    fn degenerate_exponent_rejected() {
        assert!(extrapolation_weights(&StepTriple::standard(), 0).is_err());
    }

    #[test]
    fn weights_for_standard_steps() {
        // Exact rational evaluation of the weights at h' = 3/2, 9/5, 2.
        let exact = [0.05229063055748258, -0.023472194447101125, -0.011431077422354458, 0.006630532234159508];
        let w = extrapolation_weights(&StepTriple::standard(), 8).unwrap();
        for (g, e) in w.as_array().iter().zip(exact) {
            assert!((g / e - 1.0).abs() < 1e-13, "{g} {e}");
        }
    }

    #[test]
    fn corrected_value_independent_of_unit() {
        let t = [c(0.41, -0.12), c(0.4100003, -0.1200011), c(0.4100009, -0.1200023)];
        let base = StepTriple::standard();
        let r1 = two_term_correct(t, &base, 8).unwrap();
        let r2 = two_term_correct(t, &base.with_unit(1.0).unwrap(), 8).unwrap();
        assert!(rel(r2.tstar, r1.tstar) < 1e-12);
        // A scales as unit^p
        assert!(rel(r2.a, r1.a * DEFAULT_UNIT.powi(-8)) < 1e-10);
    }

    fn table(h: f64, f: impl Fn(usize, usize) -> Complex64) -> TMatrixTable {
        TMatrixTable {
            entries: DMatrix::from_fn(6, 6, f),
            basis: ChannelBasis::default_for(Symmetry::Singlet),
            energy: 2.0,
            tag: StepTag::Raw(h),
        }
    }

    fn hermitian(h: f64) -> TMatrixTable {
        let x = h / DEFAULT_UNIT;
        let v: Vec<Complex64> =
            (0..6).map(|k| c(0.2 + 0.01 * k as f64 + 1e-6 * x.powi(8), -0.03 * k as f64 + 2e-8 * x.powi(10))).collect();
        table(h, |i, j| v[i] * v[j].conj())
    }

    #[test]
    fn table_correction_preserves_hermiticity() {
        let steps = StepTriple::standard();
        let tables = steps.steps().map(hermitian);
        let out = correct_table(&tables, &steps, 8).unwrap();
        assert_eq!(out.table.hermiticity_defect(), 0.0);
        assert_eq!(out.table.tag, StepTag::Corrected);
        assert!(out.reconstruction_defect() < 1e-12);
    }

    #[test]
    fn planted_table_contamination_recovered() {
        let steps = StepTriple::standard();
        let truth = |i: usize, j: usize| c(0.1 * (i + 1) as f64, 0.05 * j as f64 - 0.1);
        let tables = steps.steps().map(|h| {
            let x = h / DEFAULT_UNIT;
            table(h, |i, j| truth(i, j) + c(1e-5, -3e-6) * x.powi(8) * (i + j + 1) as f64 + c(-4e-7, 1e-6) * x.powi(10))
        });
        let out = correct_table(&tables, &steps, 8).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!(rel(out.table.entries[(i, j)], truth(i, j)) < 1e-10);
            }
        }
    }

    #[test]
    fn identical_tables_pass_through() {
        let steps = StepTriple::standard();
        let base = hermitian(0.0075);
        let tables = steps.steps().map(|h| TMatrixTable { tag: StepTag::Raw(h), ..base.clone() });
        let out = correct_table(&tables, &steps, 8).unwrap();
        assert_eq!(out.table.entries, base.entries);
    }

    #[test]
    fn mismatched_metadata_rejected() {
        let steps = StepTriple::standard();
        let mut tables = steps.steps().map(hermitian);
        tables[1].energy = 3.0;
        assert!(matches!(correct_table(&tables, &steps, 8), Err(Error::Metadata(_))));
        let mut tables = steps.steps().map(hermitian);
        tables[2].tag = StepTag::Raw(0.02);
        assert!(matches!(correct_table(&tables, &steps, 8), Err(Error::Metadata(_))));
        let mut tables = steps.steps().map(hermitian);
        tables[0].basis = ChannelBasis::default_for(Symmetry::Triplet);
        assert!(matches!(correct_table(&tables, &steps, 8), Err(Error::Metadata(_))));
    }

    proptest! {
        #[test]
        fn exact_on_model_class(
            c0 in prop_oneof![-1.0..-0.1f64, 0.1..1.0f64],
            c1 in -1.0..1.0f64,
            c2 in -1.0..1.0f64,
            p in 2..10i32,
        ) {
            let steps = StepTriple::standard();
            let t = steps.scaled().map(|h| c(c0 + c1 * h.powi(p) + c2 * h.powi(p + 2), 0.0));
            let r = two_term_correct(t, &steps, p).unwrap();
            prop_assert!(rel(r.tstar, c(c0, 0.0)) < 1e-10);
        }
    }
}
