use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hpw_core::convergence::{measure_order, OrderReport, PROBE_STEPS};
use hpw_core::extrapolation::correct_table;
use hpw_core::fitting::{self, compare_with, default_max_drop, interpolate, trim_extremes, Axis, Comparison};
use hpw_core::io::{self, Metadata};
use hpw_core::observables::sdcs_curve;
use hpw_core::{prepare, DataSet, FitReport, ModelSpec, SdcsCurve, StepTag, StepTriple, Symmetry, TMatrixTable};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Plan, RunConfig};
use crate::error::CliError;
use crate::manifest::{Manifest, RunRecord};
use crate::output::{self, write_atomic};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest acceptable SDCS mirror defect before a warning.
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub runs: Vec<RunRecord>,
    pub files: Vec<PathBuf>,
    pub order: Option<OrderReport>,
}

impl fmt::Display for SolveSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.runs {
            writeln!(
                f,
                "{:<8} h = {:<7} unitarity {:.2e}  condition {:.2e}  {:.2} s",
                r.symmetry, r.h, r.unitarity_defect, r.condition, r.seconds
            )?;
        }
        if let Some(o) = &self.order {
            writeln!(f, "inner march order: fitted {:.2}, pairwise {:?}", o.fitted, o.pairwise)?;
        }
        write!(f, "{} files written", self.files.len())
    }
}

fn run_metadata(plan: &Plan, config: &RunConfig) -> Metadata {
    let mut m = Metadata::new();
    m.insert("r0_au", plan.r0)
        .insert("quad_order", config.numerics.quad_order)
        .insert("taylor_order", config.numerics.taylor_order)
        .insert("asymptotics", &config.numerics.asymptotics)
        .insert("entrance_channel", 0)
        .insert("version", VERSION);
    m
}

pub fn solve(config: &RunConfig, manifest: &mut Manifest) -> Result<SolveSummary, CliError> {
    let plan = config.plan()?;
    let started = Instant::now();
    let order = if config.numerics.measure_order {
        let t = Instant::now();
        let r = measure_order(&PROBE_STEPS)?;
        info!("inner march order {:.2} (pairwise {:?})", r.fitted, r.pairwise);
        manifest.timing("order_probe", t.elapsed().as_secs_f64());
        manifest.order = Some(r.clone());
        Some(r)
    } else {
        None
    };
    let prepared = plan
        .symmetries
        .iter()
        .map(|&s| prepare(&plan.solve_config(s, &config.numerics)))
        .collect::<hpw_core::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> =
        (0..prepared.len()).flat_map(|i| plan.steps.steps().into_iter().map(move |h| (i, h))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, h)| {
            let t = Instant::now();
            let out = prepared[i].solve(h);
            (i, h, t.elapsed().as_secs_f64(), out)
        })
        .collect();

    let base = run_metadata(&plan, config);
    let mut files = Vec::new();
    for p in &prepared {
        let path = output::coupling_path(&plan.dir, p.config.symmetry.name());
        write_atomic(&path, &io::coupling_csv(&p.coupling))?;
        files.push(path);
    }
    let mut runs = Vec::new();
    for (i, h, seconds, out) in results {
        let out = out?;
        let sym = prepared[i].config.symmetry;
        let mut meta = base.clone();
        meta.insert("unitarity_defect", format!("{:e}", out.matched.unitarity_defect))
            .insert("condition", format!("{:e}", out.condition))
            .insert("asymptotic_remainder", format!("{:e}", out.matched.remainder));
        let tp = output::tmatrix_path(&plan.dir, sym.name(), h);
        write_atomic(&tp, &io::tmatrix_csv(&out.table, &meta))?;
        let ap = output::amplitudes_path(&plan.dir, sym.name(), h);
        write_atomic(&ap, &io::amplitudes_csv(&out.amplitudes, &prepared[i].basis, StepTag::Raw(h), &meta))?;
        files.extend([tp, ap]);
        info!("{sym} h = {h}: unitarity defect {:.2e}, {seconds:.2} s", out.matched.unitarity_defect);
        runs.push(RunRecord {
            symmetry: sym.name().to_string(),
            h,
            seconds,
            unitarity_defect: out.matched.unitarity_defect,
            condition: out.condition,
            remainder: out.matched.remainder,
        });
    }
    manifest.runs.extend(runs.iter().cloned());
    manifest.timing("solve", started.elapsed().as_secs_f64());
    Ok(SolveSummary { runs, files, order })
}

#[derive(Debug, Clone)]
pub struct CorrectSummary {
    pub symmetry: Symmetry,
    pub files: Vec<PathBuf>,
    /// `(tag, mirror defect)` per curve.
    pub symmetry_defects: Vec<(String, f64)>,
    pub reconstruction_defect: f64,
}

impl fmt::Display for CorrectSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: reconstruction defect {:.2e}", self.symmetry, self.reconstruction_defect)?;
        for (tag, d) in &self.symmetry_defects {
            writeln!(f, "  sdcs {tag:<10} mirror defect {d:.2e}")?;
        }
        write!(f, "{} files written", self.files.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectOptions {
    pub unit: f64,
    pub exponent: i32,
    pub samples: usize,
    pub kappa: f64,
}

impl CorrectOptions {
    pub fn from_plan(plan: &Plan) -> Self {
        Self { unit: plan.steps.unit(), exponent: plan.exponent, samples: plan.samples, kappa: plan.kappa }
    }
}

fn read_table(path: &Path) -> Result<TMatrixTable, CliError> {
    io::read_tmatrix(&output::read(path)?).map_err(|e| CliError::from_core_at(path, e))
}

fn write_curve(dir: &Path, curve: &SdcsCurve, label: &str) -> Result<PathBuf, CliError> {
    let path = output::sdcs_path(dir, curve.symmetry.name(), label);
    write_atomic(&path, &io::sdcs_csv(curve, &Metadata::new()))?;
    Ok(path)
}

pub fn correct(inputs: &[PathBuf; 3], options: CorrectOptions, dir: &Path) -> Result<CorrectSummary, CliError> {
    let mut tables = inputs.iter().map(|p| read_table(p)).collect::<Result<Vec<_>, _>>()?;
    let mut steps = Vec::with_capacity(3);
    for (t, p) in tables.iter().zip(inputs) {
        match t.tag {
            StepTag::Raw(h) => steps.push(h),
            StepTag::Corrected => {
                return Err(CliError::Metadata(format!("{} is already corrected", p.display())));
            }
        }
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| steps[a].total_cmp(&steps[b]));
    tables = order.iter().map(|&i| tables[i].clone()).collect();
    let triple = StepTriple::new([steps[order[0]], steps[order[1]], steps[order[2]]], options.unit)
        .map_err(|e| CliError::Metadata(format!("input step lengths: {e}")))?;
    let tables: [TMatrixTable; 3] = tables.try_into().expect("three tables");
    let corrected = correct_table(&tables, &triple, options.exponent)?;

    let sym = corrected.table.symmetry();
    let mut files = Vec::new();
    let cp = output::corrected_path(dir, sym.name());
    write_atomic(&cp, &io::corrected_csv(&corrected, &Metadata::new()))?;
    files.push(cp);
    let mut defects = Vec::new();
    for t in tables.iter().chain(std::iter::once(&corrected.table)) {
        let curve = sdcs_curve(t, options.samples, options.kappa)?;
        let label = match t.tag {
            StepTag::Raw(h) => output::step_label(h),
            StepTag::Corrected => "corrected".to_string(),
        };
        let d = curve.symmetry_defect();
        if d > SYMMETRY_TOL {
            warn!("{sym} {label}: SDCS mirror defect {d:.2e} exceeds {SYMMETRY_TOL:e}");
        }
        files.push(write_curve(dir, &curve, &label)?);
        defects.push((label, d));
    }
    Ok(CorrectSummary {
        symmetry: sym,
        files,
        symmetry_defects: defects,
        reconstruction_defect: corrected.reconstruction_defect(),
    })
}

/// Model used when none is given: kinked line for singlet, quartic at 1 Ry
/// and sextic otherwise for triplet.
pub fn default_model(sym: Symmetry, energy: f64) -> ModelSpec {
    match sym {
        Symmetry::Singlet => ModelSpec::LinLin,
        Symmetry::Triplet if (energy - 1.0).abs() < 1e-9 => ModelSpec::Poly(4),
        Symmetry::Triplet => ModelSpec::Poly(6),
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub model: Option<ModelSpec>,
    pub max_drop: Option<usize>,
    pub axis: Axis,
    pub reference: Option<PathBuf>,
    pub free_scale: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { model: None, max_drop: None, axis: Axis::Energy, reference: None, free_scale: false }
    }
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub report: FitReport,
    pub symmetry: Symmetry,
    pub energy: f64,
    pub axis: Axis,
    pub warnings: Vec<String>,
    pub comparison: Option<Comparison>,
    pub model_symmetry_defect: f64,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        let names = ["a", "b", "c", "d", "e", "f", "g"];
        writeln!(f, "{} {} at {} Ry, x = {}", self.symmetry, self.report.model.name(), self.energy, self.axis)?;
        for (n, c) in names.iter().zip(self.report.model.coefficients()) {
            writeln!(f, "  {n} = {c:.10e}")?;
        }
        writeln!(
            f,
            "  residual norm {:.3e} over {} points, trimmed {:?}",
            self.report.residual_norm, self.report.points_used, self.report.trimmed
        )?;
        if !self.report.kink_identified {
            writeln!(f, "  kink position is not identifiable (c ~ 0)")?;
        }
        writeln!(f, "  model mirror defect {:.2e}", self.model_symmetry_defect)?;
        if let Some(c) = &self.comparison {
            writeln!(f, "  reference: scale {:.6e}, rms {:.3e}, max {:.3e} over {} points", c.scale, c.rms, c.max_abs, c.points)?;
        }
        write!(f, "{} files written", self.files.len())
    }
}

fn read_reference(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    io::read_points(&output::read(path)?).map_err(|e| CliError::from_core_at(path, e))
}

pub fn fit(input: &Path, options: &FitOptions, dir: &Path) -> Result<FitSummary, CliError> {
    let curve = io::read_sdcs(&output::read(input)?).map_err(|e| CliError::from_core_at(input, e))?;
    let spec = options.model.unwrap_or_else(|| default_model(curve.symmetry, curve.energy));
    let mut warnings = Vec::new();
    if spec == ModelSpec::LinLin && curve.symmetry == Symmetry::Triplet {
        let w = "the kinked-line model is meant for singlet curves; triplet curves are usually fitted with polynomials".to_string();
        warn!("{w}");
        warnings.push(w);
    }
    let data = DataSet::from_curve(&curve, options.axis)?;
    let max_drop = options.max_drop.unwrap_or_else(|| default_max_drop(data.len()));
    let trimmed = trim_extremes(&data, spec, max_drop).map_err(|e| match e {
        hpw_core::Error::InvalidParameter(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let report = fitting::fit(&trimmed, spec)?;
    let comparison = match &options.reference {
        Some(p) => Some(compare_with(|x| report.model.eval(x), &read_reference(p)?, options.free_scale)?),
        None => None,
    };
    let span = match options.axis {
        Axis::Energy => curve.energy,
        Axis::Fraction => 1.0,
    };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("sdcs").to_string();
    let mut meta = Metadata::new();
    meta.insert("source", input.display())
        .insert("symmetry", curve.symmetry)
        .insert("energy_ry", curve.energy)
        .insert("axis", options.axis)
        .insert("max_drop", max_drop);
    if let Some(c) = &comparison {
        meta.insert("reference_scale", format!("{:e}", c.scale)).insert("reference_rms", format!("{:e}", c.rms));
    }
    let report_path = dir.join(format!("fit_{stem}.csv"));
    write_atomic(&report_path, &io::fit_report_csv(&report, &meta))?;
    let curve_path = dir.join(format!("fit_curve_{stem}.csv"));
    write_atomic(&curve_path, &io::fit_curve_csv(&data.x, &data.y, &report, &meta))?;
    Ok(FitSummary {
        model_symmetry_defect: fitting::symmetry_defect(&report.model, span, curve.samples.len()),
        report,
        symmetry: curve.symmetry,
        energy: curve.energy,
        axis: options.axis,
        warnings,
        comparison,
        files: vec![report_path, curve_path],
    })
}

/// Compares an SDCS or fit file against reference points.
pub fn compare(ours: &Path, reference: &Path, free_scale: bool, axis: Axis) -> Result<Comparison, CliError> {
    let text = output::read(ours)?;
    let doc = io::Document::parse(&text).map_err(|e| CliError::from_core_at(ours, e))?;
    let refs = read_reference(reference)?;
    let kind = doc.meta.get("kind").unwrap_or("");
    let result = match kind {
        "fit" => {
            let m = io::read_fit_model(&text).map_err(|e| CliError::from_core_at(ours, e))?;
            compare_with(|x| m.eval(x), &refs, free_scale)
        }
        "sdcs" => {
            let c = io::read_sdcs(&text).map_err(|e| CliError::from_core_at(ours, e))?;
            let pts = match axis {
                Axis::Energy => c.energy_points(),
                Axis::Fraction => c.samples.clone(),
            };
            compare_with(|x| interpolate(&pts, x), &refs, free_scale)
        }
        other => {
            return Err(CliError::Parse {
                path: ours.display().to_string(),
                message: format!("cannot compare a '{other}' file; expected sdcs or fit"),
            })
        }
    };
    Ok(result?)
}

#[derive(Debug, Clone)]
pub struct AllSummary {
    pub solve: SolveSummary,
    pub corrections: Vec<CorrectSummary>,
    pub fits: Vec<FitSummary>,
}

impl fmt::Display for AllSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.solve)?;
        for c in &self.corrections {
            writeln!(f, "{c}")?;
        }
        for s in &self.fits {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

pub fn all(config: &RunConfig, fit_options: &FitOptions, manifest: &mut Manifest) -> Result<AllSummary, CliError> {
    let plan = config.plan()?;
    let solve = solve(config, manifest)?;
    let started = Instant::now();
    let mut corrections = Vec::new();
    let mut fits = Vec::new();
    for &sym in &plan.symmetries {
        let h = plan.steps.steps();
        let inputs = h.map(|h| output::tmatrix_path(&plan.dir, sym.name(), h));
        let c = correct(&inputs, CorrectOptions::from_plan(&plan), &plan.dir)?;
        let corrected_curve = output::sdcs_path(&plan.dir, sym.name(), "corrected");
        fits.push(fit(&corrected_curve, fit_options, &plan.dir)?);
        corrections.push(c);
    }
    manifest.timing("correct_and_fit", started.elapsed().as_secs_f64());
    Ok(AllSummary { solve, corrections, fits })
}
