//! Run configuration, read from TOML with `[physics]`, `[numerics]` and
//! `[output]` tables. A manifest is the same file plus a `[manifest]` table,
//! which is ignored on load.

use std::path::{Path, PathBuf};

use hpw_core::extrapolation::{DEFAULT_EXPONENT, DEFAULT_STEPS, DEFAULT_UNIT};
use hpw_core::matcher::Truncation;
use hpw_core::observables::{total_energy_ry, DEFAULT_SAMPLES};
use hpw_core::{SolveConfig, StepTriple, Symmetry};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DESK_R0: f64 = 300.0;

/// Matching radii used for the three benchmark energies.
pub const FULL_SCALE_R0: [(f64, f64); 3] = [(27.2, 5000.0), (40.8, 3000.0), (54.4, 2500.0)];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub numerics: Numerics,
    pub output: Output,
    #[serde(skip_serializing)]
    pub manifest: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    /// `singlet`, `triplet` or `both`.
    pub symmetry: String,
    pub incident_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub steps: [f64; 3],
    pub unit: f64,
    pub exponent: i32,
    /// Matching radius in a.u.; when absent, desk or full scale applies.
    pub r0: Option<f64>,
    pub full_scale: bool,
    pub basis_size: usize,
    pub quad_order: usize,
    pub taylor_order: usize,
    /// `series` or `leading`.
    pub asymptotics: String,
    pub measure_order: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub samples: usize,
    pub kappa: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { symmetry: "both".into(), incident_ev: 40.8 }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            unit: DEFAULT_UNIT,
            exponent: DEFAULT_EXPONENT,
            r0: None,
            full_scale: false,
            basis_size: 6,
            quad_order: hpw_core::basis::DEFAULT_QUAD_ORDER,
            taylor_order: hpw_core::propagator::DEFAULT_TAYLOR_ORDER,
            asymptotics: "series".into(),
            measure_order: true,
        }
    }
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), samples: DEFAULT_SAMPLES, kappa: 1.0 }
    }
}

/// Checked view of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub symmetries: Vec<Symmetry>,
    pub energy: f64,
    pub r0: f64,
    pub steps: StepTriple,
    pub exponent: i32,
    pub truncation: Truncation,
    pub samples: usize,
    pub kappa: f64,
    pub dir: PathBuf,
}

impl Plan {
    pub fn solve_config(&self, symmetry: Symmetry, numerics: &Numerics) -> SolveConfig {
        SolveConfig {
            symmetry,
            energy: self.energy,
            basis_size: numerics.basis_size,
            quad_order: numerics.quad_order,
            r0: self.r0,
            taylor_order: numerics.taylor_order,
            entrance: 0,
            truncation: self.truncation,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn symmetries(&self) -> Result<Vec<Symmetry>, CliError> {
        match self.physics.symmetry.trim().to_ascii_lowercase().as_str() {
            "both" => Ok(vec![Symmetry::Singlet, Symmetry::Triplet]),
            s => s.parse::<Symmetry>().map(|x| vec![x]).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn r0(&self) -> Result<f64, CliError> {
        if let Some(r0) = self.numerics.r0 {
            return Ok(r0);
        }
        if !self.numerics.full_scale {
            return Ok(DESK_R0);
        }
        FULL_SCALE_R0
            .iter()
            .find(|(ev, _)| (ev - self.physics.incident_ev).abs() < 1e-9)
            .map(|(_, r0)| *r0)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "no full-scale R0 for {} eV; set numerics.r0 explicitly",
                    self.physics.incident_ev
                ))
            })
    }

    pub fn plan(&self) -> Result<Plan, CliError> {
        let cfg = |m: String| CliError::Config(m);
        let energy = total_energy_ry(self.physics.incident_ev);
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(cfg(format!(
                "incident energy {} eV is below the ionization threshold",
                self.physics.incident_ev
            )));
        }
        let steps = StepTriple::new(self.numerics.steps, self.numerics.unit).map_err(|e| cfg(e.to_string()))?;
        let r0 = self.r0()?;
        let delta = 100.0 * steps.steps()[2];
        if !(r0 > delta) {
            return Err(cfg(format!("R0 = {r0} a.u. must exceed the inner region 100·h = {delta} a.u.")));
        }
        if !(1..=20).contains(&self.numerics.exponent) {
            return Err(cfg(format!("exponent {} outside 1..=20", self.numerics.exponent)));
        }
        if self.numerics.basis_size == 0 {
            return Err(cfg("basis_size must be positive".into()));
        }
        if self.numerics.taylor_order < 2 {
            return Err(cfg(format!("taylor_order {} is below 2", self.numerics.taylor_order)));
        }
        let truncation = match self.numerics.asymptotics.trim().to_ascii_lowercase().as_str() {
            "series" => Truncation::Series,
            "leading" => Truncation::Leading,
            other => return Err(cfg(format!("unknown asymptotics '{other}', expected series or leading"))),
        };
        if self.output.samples < 2 {
            return Err(cfg(format!("need at least 2 SDCS samples, got {}", self.output.samples)));
        }
        if !self.output.kappa.is_finite() {
            return Err(cfg("kappa must be finite".into()));
        }
        Ok(Plan {
            symmetries: self.symmetries()?,
            energy,
            r0,
            steps,
            exponent: self.numerics.exponent,
            truncation,
            samples: self.output.samples,
            kappa: self.output.kappa,
            dir: self.output.dir.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_standard_setup() {
        let plan = RunConfig::default().plan().unwrap();
        assert_eq!(plan.steps.steps(), [0.0075, 0.009, 0.01]);
        assert_eq!(plan.symmetries.len(), 2);
        assert!((plan.energy - 2.0).abs() < 1e-15);
        assert_eq!(plan.r0, DESK_R0);
        assert_eq!(plan.samples, 80);
    }

    #[test]
    fn full_scale_radius() {
        let mut c = RunConfig::default();
        c.numerics.full_scale = true;
        assert_eq!(c.r0().unwrap(), 3000.0);
        c.physics.incident_ev = 30.0;
        assert!(matches!(c.r0(), Err(CliError::Config(_))));
        c.numerics.r0 = Some(400.0);
        assert_eq!(c.r0().unwrap(), 400.0);
    }

    #[test]
    fn toml_round_trip_and_manifest_table() {
        let c = RunConfig::default();
        let text = c.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        let with_manifest = format!("{text}\n[manifest]\nversion = \"x\"\n");
        assert_eq!(RunConfig::parse(&with_manifest).unwrap().plan().unwrap(), c.plan().unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("[physics]\nsymetry = 'singlet'\n").is_err());
        let c = RunConfig::parse("[numerics]\nsteps = [0.01, 0.01, 0.02]\n").unwrap();
        let err = c.plan().unwrap_err().to_string();
        assert!(err.contains("h1 < h2 < h3"), "{err}");
        let c = RunConfig::parse("[physics]\nincident_ev = 10.0\n").unwrap();
        assert!(c.plan().is_err());
        let c = RunConfig::parse("[physics]\nsymmetry = 'quartet'\n").unwrap();
        assert!(c.plan().is_err());
    }
}
