use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpw_cli::commands::{self, CorrectOptions, FitOptions};
use hpw_cli::manifest::Manifest;
use hpw_cli::{CliError, RunConfig};
use hpw_core::fitting::Axis;
use hpw_core::ModelSpec;

/// Temkin-Poet hyperspherical partial-wave solver with two-term step-size correction.
#[derive(Debug, Parser)]
#[command(name = "hpw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve at the three step lengths and write T-matrix tables.
    Solve(RunArgs),
    /// Combine three T-matrix tables into corrected tables and SDCS curves.
    Correct(CorrectArgs),
    /// Fit an SDCS curve.
    Fit(FitArgs),
    /// Compare an SDCS or fit file with reference points.
    Compare(CompareArgs),
    /// Solve, correct and fit in one go.
    All {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        fit: FitFlags,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration or a previous manifest.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// singlet, triplet or both.
    #[arg(long)]
    symmetry: Option<String>,
    /// Incident electron energy in eV.
    #[arg(long)]
    energy_ev: Option<f64>,
    /// Matching radius in a.u.
    #[arg(long)]
    r0: Option<f64>,
    /// Use the full-scale matching radius for the chosen energy.
    #[arg(long)]
    full_scale: bool,
    /// Step lengths h1,h2,h3 in a.u.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<f64>>,
    /// SDCS prefactor per unit |T|^2.
    #[arg(long)]
    kappa: Option<f64>,
    /// SDCS samples across the energy range.
    #[arg(long)]
    samples: Option<usize>,
    /// Skip the double-double convergence-order probe.
    #[arg(long)]
    no_order_probe: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            c.output.dir = v.clone();
        }
        if let Some(v) = &self.symmetry {
            c.physics.symmetry = v.clone();
        }
        if let Some(v) = self.energy_ev {
            c.physics.incident_ev = v;
        }
        if let Some(v) = self.r0 {
            c.numerics.r0 = Some(v);
        }
        if self.full_scale {
            c.numerics.full_scale = true;
        }
        if let Some(v) = &self.steps {
            c.numerics.steps = v
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Config(format!("--steps takes three values, got {}", v.len())))?;
        }
        if let Some(v) = self.kappa {
            c.output.kappa = v;
        }
        if let Some(v) = self.samples {
            c.output.samples = v;
        }
        if self.no_order_probe {
            c.numerics.measure_order = false;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct CorrectArgs {
    /// Three T-matrix tables, any order.
    #[arg(num_args = 3, required = true)]
    tables: Vec<PathBuf>,
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Reference length for h in a.u.
    #[arg(long, default_value_t = hpw_core::extrapolation::DEFAULT_UNIT)]
    unit: f64,
    /// Leading error exponent p; the second term uses p + 2.
    #[arg(long, default_value_t = hpw_core::extrapolation::DEFAULT_EXPONENT)]
    exponent: i32,
    #[arg(long, default_value_t = hpw_core::observables::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
}

#[derive(Debug, Args)]
struct FitFlags {
    /// linlin or poly0..poly6; defaults by symmetry and energy.
    #[arg(long)]
    model: Option<String>,
    /// Maximum number of end points to drop (default 10%).
    #[arg(long)]
    max_drop: Option<usize>,
    /// energy (Ry) or fraction.
    #[arg(long, default_value = "energy")]
    axis: String,
    /// Reference curve to overlay.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Fit a single scale factor onto the reference.
    #[arg(long)]
    free_scale: bool,
}

impl FitFlags {
    fn options(&self) -> Result<FitOptions, CliError> {
        let model = match &self.model {
            Some(m) => Some(m.parse::<ModelSpec>().map_err(|e| CliError::Config(e.to_string()))?),
            None => None,
        };
        Ok(FitOptions {
            model,
            max_drop: self.max_drop,
            axis: parse_axis(&self.axis)?,
            reference: self.compare.clone(),
            free_scale: self.free_scale,
        })
    }
}

fn parse_axis(s: &str) -> Result<Axis, CliError> {
    s.parse::<Axis>().map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Args)]
struct FitArgs {
    /// SDCS file.
    input: PathBuf,
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    flags: FitFlags,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// SDCS or fit file.
    ours: PathBuf,
    /// Two-column reference file.
    reference: PathBuf,
    #[arg(long)]
    free_scale: bool,
    #[arg(long, default_value = "energy")]
    axis: String,
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Solve(args) => {
            let config = args.load()?;
            let plan = config.plan()?;
            let mut manifest = Manifest::new("solve");
            let summary = commands::solve(&config, &mut manifest)?;
            manifest.write(&plan.dir.join("manifest.toml"), &config, &plan)?;
            Ok(summary.to_string())
        }
        Command::Correct(args) => {
            let tables: [PathBuf; 3] = args.tables.try_into().expect("clap enforces three tables");
            let options = CorrectOptions { unit: args.unit, exponent: args.exponent, samples: args.samples, kappa: args.kappa };
            Ok(commands::correct(&tables, options, &args.out)?.to_string())
        }
        Command::Fit(args) => Ok(commands::fit(&args.input, &args.flags.options()?, &args.out)?.to_string()),
        Command::Compare(args) => {
            let c = commands::compare(&args.ours, &args.reference, args.free_scale, parse_axis(&args.axis)?)?;
            Ok(format!("scale {:.6e}  rms {:.3e}  max {:.3e}  points {}", c.scale, c.rms, c.max_abs, c.points))
        }
        Command::All { run, fit } => {
            let config = run.load()?;
            let plan = config.plan()?;
            let mut manifest = Manifest::new("all");
            let summary = commands::all(&config, &fit.options()?, &mut manifest)?;
            manifest.write(&plan.dir.join("manifest.toml"), &config, &plan)?;
            Ok(summary.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
