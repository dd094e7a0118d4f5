//! Command-line front end: run experiments, check structural
//! assumptions, verify inequalities, measure scheme convergence and fit
//! decay exponents.  Exit codes: 0 success, 1 a check or verification
//! failed, 2 configuration problems (including unknown names and empty
//! fit windows), 3 an unexpected blow-up.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{fit_decay, run_with_diagnostics};
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::inequality::{
    default_corpus, verify_inequality, LabParams, RatioReport, INEQUALITY_NAMES, LAB_HALF_WIDTH,
    LAB_TIME,
};
use crate::report::{self, SeriesTable};
use crate::solver::{linear_reference_study, ConvergenceStudy, RadialReference};
use crate::system::{check_assumptions, AssumptionCheck};

#[derive(Parser)]
#[command(
    name = "wavelab",
    version,
    about = "Numerical laboratory for multi-speed semilinear wave systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured system and write series.csv plus summary.json.
    Run(SourceArgs),
    /// Print the structural assumption report for a system.
    Check(SourceArgs),
    /// Evaluate inequality verification reports on the standard corpus.
    Verify(VerifyArgs),
    /// Measure the scheme order against the closed-form linear solution.
    Convergence(ConvergenceArgs),
    /// Fit a power-law exponent to one column of a series file.
    Fit(FitArgs),
}

/// Where the configuration comes from, plus overrides.
#[derive(Args)]
struct SourceArgs {
    /// Path to a JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset baseline instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Override: points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Override: run horizon.
    #[arg(long)]
    tmax: Option<f64>,
    /// Override: CFL number.
    #[arg(long)]
    cfl: Option<f64>,
    /// Override: global data amplitude factor.
    #[arg(long)]
    amp: Option<f64>,
    /// Override: output directory.
    #[arg(long)]
    out: Option<String>,
}

impl SourceArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => RunConfig::from_file(path)?,
            (None, Some(name)) => RunConfig::from_preset(name),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "pass --config or --preset, not both".to_string(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of --config or --preset is required".to_string(),
                ))
            }
        };
        if let Some(n) = self.grid {
            cfg.grid.n = n;
        }
        if let Some(t) = self.tmax {
            cfg.t_max = t;
        }
        if let Some(c) = self.cfl {
            cfg.cfl = c;
        }
        if let Some(a) = self.amp {
            cfg.data.amp = a;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Inequality name, or "all".
    #[arg(long, default_value = "all")]
    inequality: String,
    /// Corpus grid size per axis (even, at least 16).
    #[arg(long, default_value_t = 96)]
    grid: usize,
    /// Optional system whose leading self-coupling is used as the
    /// pointwise null form; its preset also drives the local-decay runs.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Directory to write verify.json into, besides stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Finest grid of the refinement ladder n/4, n/2, n.
    #[arg(long, default_value_t = 96)]
    grid: usize,
    /// Final comparison time.
    #[arg(long, default_value_t = 1.5)]
    tmax: f64,
    #[arg(long, default_value_t = 0.4)]
    cfl: f64,
    /// Directory to write convergence.json into, besides stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Path to a series.csv produced by the run command.
    series: PathBuf,
    /// Column to fit.
    #[arg(long)]
    column: String,
    /// Time window, two endpoints.
    #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
    window: Vec<f64>,
}

/// Entry point taking explicit arguments, so tests can drive the full
/// command surface in-process.
pub fn main_from<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Fit(args) => cmd_fit(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_run(args: &SourceArgs) -> Result<i32> {
    let resolved = args.load()?.resolve()?;
    let run = run_with_diagnostics(
        &resolved.system,
        &resolved.data,
        resolved.grid3(),
        &resolved.run_options(),
    )?;
    let dir = PathBuf::from(&resolved.out);
    std::fs::create_dir_all(&dir)?;
    let series_path = dir.join("series.csv");
    let summary_path = dir.join("summary.json");
    std::fs::write(&series_path, report::series_csv(&run))?;
    let summary = report::summarize(&resolved, &run);
    std::fs::write(&summary_path, report::to_json(&summary)?)?;
    println!("wrote {} and {}", series_path.display(), summary_path.display());
    if let Some(t) = run.blow_up {
        println!("blow-up flagged at t = {t:.6}");
        if resolved.expect_global {
            return Ok(3);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct CheckOutput {
    schema: u32,
    preset: Option<String>,
    checks: Vec<AssumptionCheck>,
    pass: bool,
}

fn cmd_check(args: &SourceArgs) -> Result<i32> {
    let resolved = args.load()?.resolve()?;
    let report_out = check_assumptions(&resolved.system);
    let out = CheckOutput {
        schema: resolved.schema,
        preset: resolved.preset.clone(),
        checks: report_out.checks,
        pass: report_out.pass,
    };
    println!("{}", report::to_json(&out)?);
    Ok(if out.pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct VerifyOutput {
    schema: u32,
    grid_n: usize,
    time: f64,
    reports: Vec<RatioReport>,
    pass: bool,
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let names: Vec<&str> = if args.inequality == "all" {
        INEQUALITY_NAMES.to_vec()
    } else {
        let name = INEQUALITY_NAMES
            .iter()
            .find(|n| **n == args.inequality)
            .ok_or_else(|| {
                Error::Inequality(format!(
                    "unknown inequality {:?}; expected \"all\" or one of {}",
                    args.inequality,
                    INEQUALITY_NAMES.join(", ")
                ))
            })?;
        vec![*name]
    };
    let mut params = LabParams::default();
    if args.config.is_some() || args.preset.is_some() {
        let source = SourceArgs {
            config: args.config.clone(),
            preset: args.preset.clone(),
            grid: None,
            tmax: None,
            cfl: None,
            amp: None,
            out: None,
        };
        let resolved = source.load()?.resolve()?;
        let leading = resolved.system.quad_form(0, 0, 0);
        if !leading.is_zero() {
            params.null_form = leading.clone();
        }
        if let Some(name) = &resolved.preset {
            params.kss_preset = name.clone();
        }
    }
    let corpus = default_corpus(Grid3::new(args.grid, LAB_HALF_WIDTH)?, LAB_TIME)?;
    let mut reports = Vec::new();
    for name in names {
        reports.push(verify_inequality(name, &corpus, &params)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let out = VerifyOutput { schema: 1, grid_n: args.grid, time: LAB_TIME, reports, pass };
    let text = report::to_json(&out)?;
    println!("{text}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(PathBuf::from(dir).join("verify.json"), &text)?;
    }
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct ConvergenceOutput {
    schema: u32,
    amplitude: f64,
    width: f64,
    speed: f64,
    half_width: f64,
    t_final: f64,
    cfl: f64,
    study: ConvergenceStudy,
    pass: bool,
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<i32> {
    if args.grid % 4 != 0 || args.grid < 32 {
        return Err(Error::Config(format!(
            "convergence needs a finest grid divisible by 4 and at least 32, got {}",
            args.grid
        )));
    }
    let ladder = [args.grid / 4, args.grid / 2, args.grid];
    let reference = RadialReference { amplitude: 1.0, width: 0.75, speed: 1.0 };
    let half_width = 6.0;
    let study = linear_reference_study(reference, half_width, args.tmax, args.cfl, &ladder)?;
    let pass = study.observed_order >= 3.5;
    let out = ConvergenceOutput {
        schema: 1,
        amplitude: reference.amplitude,
        width: reference.width,
        speed: reference.speed,
        half_width,
        t_final: args.tmax,
        cfl: args.cfl,
        study,
        pass,
    };
    let text = report::to_json(&out)?;
    println!("{text}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(PathBuf::from(dir).join("convergence.json"), &text)?;
    }
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct FitOutput {
    schema: u32,
    series: String,
    column: String,
    window: [f64; 2],
    samples: usize,
    exponent: f64,
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let table = SeriesTable::from_path(&args.series)?;
    let ts = table.times()?;
    let ys = table.column(&args.column)?;
    let window = (args.window[0], args.window[1]);
    let exponent = fit_decay(&ts, &ys, window)?;
    let samples = ts.iter().filter(|t| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12).count();
    let out = FitOutput {
        schema: 1,
        series: args.series.display().to_string(),
        column: args.column.clone(),
        window: [window.0, window.1],
        samples,
        exponent,
    };
    println!("{}", report::to_json(&out)?);
    Ok(0)
}
