mod config;
mod diagnose;
mod fit;
mod params;
mod rhat;
mod rundir;
mod simulate;
mod summarize;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Grid;
use diagnose::DiagnoseOptions;
use fit::FitOverrides;

/// Marks an error caused by bad input rather than a failed computation.
#[derive(Debug)]
pub struct Invalid(pub anyhow::Error);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid<E: Into<anyhow::Error>>(e: E) -> anyhow::Error {
    anyhow::Error::new(Invalid(e.into()))
}

#[derive(Parser, Debug)]
#[command(name = "mfamd", version)]
#[command(about = "Fit and diagnose mixtures of factor analyzers for mixed categorical survey data")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sampler, relabel, align and write run directories.
    Fit(FitArgs),
    /// Draw a synthetic data set and its ground truth.
    Simulate(SimulateArgs),
    /// Posterior predictive, residual and distance diagnostics of a run.
    Diagnose(DiagnoseArgs),
    /// Print a short report of a run.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    /// Cluster and trait ranges, e.g. `2..6,1..2`.
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    schema: PathBuf,
    /// TOML or JSON parameter file.
    #[arg(long)]
    params: PathBuf,
    #[arg(short = 'n', long = "households")]
    households: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    run: PathBuf,
    #[arg(long)]
    tsspr: bool,
    #[arg(long)]
    hellinger: bool,
    #[arg(long)]
    uncertainty: bool,
    #[arg(long)]
    residuals: bool,
    #[arg(long)]
    modal: bool,
    /// Number of most frequent observed patterns compared.
    #[arg(short = 'T', default_value_t = 20)]
    truncation: usize,
    /// Posterior predictive replicates.
    #[arg(short = 'R', default_value_t = 1500)]
    replicates: usize,
    /// 1-based households for residuals, comma separated.
    #[arg(long, value_delimiter = ',')]
    households: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    residual_households: usize,
    #[arg(long, default_value_t = 10)]
    residual_sweeps: usize,
    #[arg(long, default_value_t = 200)]
    residual_snapshots: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    run: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("MFAMD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(anyhow::anyhow!("MFAMD_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Fit(a) => {
            let overrides = FitOverrides { grid: a.grid, seed: a.seed, chains: a.chains, out: a.out };
            for dir in fit::cmd_fit(&a.config, overrides)? {
                println!("{}", dir.display());
            }
        }
        Command::Simulate(a) => {
            let path = simulate::cmd_simulate(&a.schema, &a.params, a.households, a.seed, &a.out)?;
            println!("{}", path.display());
        }
        Command::Diagnose(a) => {
            let options = DiagnoseOptions {
                tsspr: a.tsspr,
                hellinger: a.hellinger,
                uncertainty: a.uncertainty,
                residuals: a.residuals,
                modal: a.modal,
                truncation: a.truncation,
                replicates: a.replicates,
                households: a.households,
                residual_households: a.residual_households,
                residual_sweeps: a.residual_sweeps,
                residual_snapshots: a.residual_snapshots,
                seed: a.seed,
            };
            for path in diagnose::cmd_diagnose(&a.run, options)? {
                println!("{}", path.display());
            }
        }
        Command::Summarize(a) => print!("{}", summarize::cmd_summarize(&a.run)?),
    }
    Ok(())
}

fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<Invalid>().is_some() || c.downcast_ref::<mfamd::Error>().is_some_and(|m| m.is_validation())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
