//! Run manifest: the configuration echo plus a `[manifest]` table with the
//! measured order, conventions and timings.

use std::path::Path;

use hpw_core::convergence::OrderReport;
use serde::Serialize;

use crate::config::{Plan, RunConfig};
use crate::error::CliError;
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub symmetry: String,
    pub h: f64,
    pub seconds: f64,
    pub unitarity_defect: f64,
    pub condition: f64,
    pub remainder: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub command: String,
    pub order: Option<OrderReport>,
    pub runs: Vec<RunRecord>,
    pub timings: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct MeasuredOrder {
    steps: Vec<f64>,
    errors: Vec<f64>,
    pairwise: Vec<f64>,
    fitted: f64,
    nearest_even: u32,
}

#[derive(Serialize)]
struct Conventions {
    amplitude: &'static str,
    basis_normalization: &'static str,
    wronskian: &'static str,
    kappa: f64,
    kappa_units: &'static str,
    extrapolation_unit_au: f64,
    extrapolation_exponents: [i32; 2],
    r0_au: f64,
    total_energy_ry: f64,
}

#[derive(Serialize)]
struct Section<'a> {
    version: &'static str,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    measured_order: Option<MeasuredOrder>,
    conventions: Conventions,
    timings: toml::Table,
    runs: &'a [RunRecord],
}

#[derive(Serialize)]
struct Wrapper<'a> {
    manifest: Section<'a>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), ..Default::default() }
    }

    pub fn timing(&mut self, stage: &str, seconds: f64) {
        self.timings.push((stage.to_string(), seconds));
    }

    pub fn render(&self, config: &RunConfig, plan: &Plan) -> String {
        let section = Section {
            version: crate::commands::VERSION,
            command: &self.command,
            measured_order: self.order.as_ref().map(|o| MeasuredOrder {
                steps: o.steps.clone(),
                errors: o.errors.clone(),
                pairwise: o.pairwise.clone(),
                fitted: o.fitted,
                nearest_even: o.nearest_even(),
            }),
            conventions: Conventions {
                amplitude: "C(n) is the entrance-channel column of the S-matrix in the unit-normalized channel basis",
                basis_normalization: "unit norm with weight sin^2(alpha) cos^2(alpha) (4 pi)^2",
                wronskian: "u' v - u v' = 1",
                kappa: plan.kappa,
                kappa_units: "pi a0^2 / Ry per unit |T|^2",
                extrapolation_unit_au: plan.steps.unit(),
                extrapolation_exponents: [plan.exponent, plan.exponent + 2],
                r0_au: plan.r0,
                total_energy_ry: plan.energy,
            },
            timings: self.timings.iter().map(|(k, v)| (k.clone(), toml::Value::Float(*v))).collect(),
            runs: &self.runs,
        };
        let mut out = config.to_toml();
        out.push('\n');
        out.push_str(&toml::to_string(&Wrapper { manifest: section }).expect("manifest serializes"));
        out
    }

    pub fn write(&self, path: &Path, config: &RunConfig, plan: &Plan) -> Result<(), CliError> {
        write_atomic(path, &self.render(config, plan))
    }
}
