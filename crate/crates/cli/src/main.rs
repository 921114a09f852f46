use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trapping_core::insured::SolverSettings;
use trapping_core::ErrorKind;

mod commands;
mod output;
mod params;

use commands::Context;
use params::Params;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] trapping_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Constraint => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Input => 4,
            },
            CliError::Input(_) | CliError::Io(_) => 4,
        }
    }
}

/// Trapping probabilities of household capital with and without insurance.
#[derive(Debug, Parser)]
#[command(name = "trapping", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    values: ParamArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form curve without insurance over alphas × lambdas.
    Uninsured,
    /// Proportional losses against exponential losses with means 1/mu.
    CompareExp,
    /// Bound B(α, κ) and the largest admissible λ over alphas × thetas × kappas.
    Constraint,
    /// Insured curve 1 + A·y over kappas × lambdas.
    Insured,
    /// Monte Carlo estimates on the capital grid.
    Simulate,
    /// Fit of A to simulated points on the first interval, with the limit probe.
    Fit,
    /// Uninsured and insured curves with their crossing, or with --sweep the
    /// crossing distance over kappas × lambdas × thetas.
    Xc,
    /// Negative root of the decay equation over alphas × lambdas × kappas.
    Decay,
}

/// Run plumbing; none of it affects the numbers.
#[derive(Debug, Args)]
struct RunArgs {
    /// key=value file applied before the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for built insured solutions.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, global = true)]
    a: Option<String>,
    #[arg(long, global = true)]
    b: Option<String>,
    #[arg(long, global = true)]
    c: Option<String>,
    #[arg(long, global = true)]
    xstar: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    kappa: Option<String>,
    #[arg(long, global = true)]
    theta: Option<String>,
    /// Comma-separated list; defaults to --alpha.
    #[arg(long, global = true)]
    alphas: Option<String>,
    /// Comma-separated list; defaults to --lambda.
    #[arg(long, global = true)]
    lambdas: Option<String>,
    /// Comma-separated list; defaults to --kappa.
    #[arg(long, global = true)]
    kappas: Option<String>,
    /// Comma-separated list; defaults to --theta.
    #[arg(long, global = true)]
    thetas: Option<String>,
    /// Exponential loss rates.
    #[arg(long, global = true)]
    mus: Option<String>,
    #[arg(long, global = true)]
    x_min: Option<String>,
    #[arg(long, global = true)]
    x_max: Option<String>,
    #[arg(long, global = true)]
    x_points: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    paths: Option<String>,
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Number of increments of the insured solution.
    #[arg(long, global = true)]
    depth: Option<String>,
    /// Base Chebyshev node count per panel.
    #[arg(long, global = true)]
    nodes: Option<String>,
    /// variable or fixed.
    #[arg(long, global = true)]
    line: Option<String>,
    /// How A is obtained: simulated or limit.
    #[arg(long, global = true)]
    source: Option<String>,
    /// Use this A instead of calibrating.
    #[arg(long, global = true, allow_hyphen_values = true)]
    constant: Option<String>,
    #[arg(long, global = true)]
    fit_points: Option<String>,
    /// Simulate insured paths.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    insured: Option<String>,
    /// Reuse the same random streams at every grid point.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    shared_streams: Option<String>,
    /// Score paths above this capital as untrapped.
    #[arg(long, global = true)]
    early_exit: Option<String>,
    /// Sweep crossing distances instead of emitting curves.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    sweep: Option<String>,
}

impl ParamArgs {
    fn into_pairs(self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("xstar", self.xstar),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("alphas", self.alphas),
            ("lambdas", self.lambdas),
            ("kappas", self.kappas),
            ("thetas", self.thetas),
            ("mus", self.mus),
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("x_points", self.x_points),
            ("seed", self.seed),
            ("paths", self.paths),
            ("horizon", self.horizon),
            ("depth", self.depth),
            ("nodes", self.nodes),
            ("line", self.line),
            ("source", self.source),
            ("constant", self.constant),
            ("fit_points", self.fit_points),
            ("insured", self.insured),
            ("shared_streams", self.shared_streams),
            ("early_exit", self.early_exit),
            ("sweep", self.sweep),
        ]
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Uninsured => "uninsured",
            Command::CompareExp => "compare-exp",
            Command::Constraint => "constraint",
            Command::Insured => "insured",
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Xc => "xc",
            Command::Decay => "decay",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot start {n} threads: {e}")))?;
    }
    let params = Params::resolve(cli.run.config.as_deref(), &cli.values.into_pairs())?;
    let settings = SolverSettings {
        depth: params.get("depth")?,
        nodes: params.get("nodes")?,
        ..SolverSettings::default()
    };
    let ctx = Context {
        params: &params,
        settings,
        cache_dir: cli.run.cache_dir.as_deref(),
    };
    let body = match cli.command {
        Command::Uninsured => commands::uninsured(&ctx)?,
        Command::CompareExp => commands::compare_exp(&ctx)?,
        Command::Constraint => commands::constraint(&ctx)?,
        Command::Insured => commands::insured(&ctx)?,
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Fit => commands::fit(&ctx)?,
        Command::Xc => commands::xc(&ctx)?,
        Command::Decay => commands::decay(&ctx)?,
    };
    let text = output::header(cli.command.name(), &params, &settings) + &body;
    match cli.run.out {
        Some(path) => fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(4);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trapping: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
