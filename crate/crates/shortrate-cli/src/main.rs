//! `shortrate`: boundary classification, eigenvalues, transition densities,
//! bond and payoff prices, and Monte Carlo runs, written as CSV.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};

use config::{FloatList, Layers, Preset};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "shortrate",
    version,
    about = "Absorbed short-rate models on [0, L]"
)]
pub struct Cli {
    /// Config file of `key = value` lines (default: $HFL_CONFIG)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Parameter preset; flags still override it
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Write the result to FILE (atomically) instead of stdout
    #[arg(long, short, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the origin and the spectrum; closed-form rule against the numeric probe
    Classify(ClassifyArgs),
    /// Eigenvalues, normalising constants and eigen-equation residuals (k = 1/2)
    Eigen(EigenArgs),
    /// Transition density under P-tilde on the grid y = i L / grid, i = 1..grid
    Density(DensityArgs),
    /// Zero-coupon bond prices and yields at t = 0
    Bond(CurveArgs),
    /// Same output as `bond`
    Yield(CurveArgs),
    /// Price a built-in payoff with the density pricer
    Price(PriceArgs),
    /// Euler-Maruyama simulation summary per horizon
    Simulate(SimulateArgs),
    /// Girsanov-weighted P paths against direct P-tilde paths
    CompareMeasures(CompareArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Elasticity exponent k of sigma(x) = a x^(1-k)
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Volatility scale a > 0 (default 1)
    #[arg(long)]
    a: Option<f64>,
    /// Absorbing cap L > 0 (default 1)
    #[arg(long = "L")]
    l: Option<f64>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Upper end of the numeric probe's integrals (default L/2)
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct EigenArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of eigenvalues (default 4)
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Starting state x in (0, L)
    #[arg(long)]
    x: Option<f64>,
    /// Start time t (default 0)
    #[arg(long)]
    t: Option<f64>,
    /// End time(s) T, comma-separated; T - t >= 0.01
    #[arg(long = "T", value_name = "T")]
    big_t: Option<FloatList>,
    /// Number of y points (default 100)
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Short rate(s) x in [0, L], comma-separated
    #[arg(long)]
    x: Option<FloatList>,
    /// Increasing maturities, comma-separated, each >= 0.01
    #[arg(long)]
    maturities: Option<FloatList>,
    /// analytic (k = 1/2 or -1/2, the default) or duhamel
    #[arg(long)]
    engine: Option<Engine>,
    /// Worker threads (default: all cores); output does not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct PayoffArgs {
    /// one, linear or put-on-rate (default one)
    #[arg(long)]
    payoff: Option<PayoffName>,
    /// Strike of put-on-rate, g(x) = max(K - x, 0)
    #[arg(long)]
    strike: Option<f64>,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    payoff: PayoffArgs,
    /// Short rate(s) x in [0, L], comma-separated
    #[arg(long)]
    x: Option<FloatList>,
    /// Valuation time t (default 0)
    #[arg(long)]
    t: Option<f64>,
    /// Maturity T; T - t >= 0.01
    #[arg(long = "T", value_name = "T")]
    big_t: Option<f64>,
}

#[derive(Debug, Args)]
struct PathArgs {
    /// Starting value x0 in [0, L]
    #[arg(long)]
    x0: Option<f64>,
    /// Euler step (default 1e-3)
    #[arg(long)]
    dt: Option<f64>,
    /// Number of paths (default 10000)
    #[arg(long)]
    paths: Option<usize>,
    /// RNG seed (default 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Brownian-bridge crossing check at L and at an exit origin (default true)
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    bridge: Option<bool>,
    /// Worker threads (default: all cores); output does not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    paths: PathArgs,
    #[command(flatten)]
    payoff: PayoffArgs,
    /// Observation horizon(s), comma-separated and increasing; all read off the same paths
    #[arg(long)]
    horizon: Option<FloatList>,
    /// P or P-tilde (default P)
    #[arg(long)]
    measure: Option<MeasureName>,
    /// Histogram bins over [0, L] (default 50)
    #[arg(long)]
    bins: Option<usize>,
    /// Also write per-path terminal records at the last horizon to FILE
    #[arg(long, value_name = "FILE")]
    dump: Option<PathBuf>,
    /// Also write terminal histograms to FILE
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    paths: PathArgs,
    /// Observation horizon
    #[arg(long)]
    horizon: Option<f64>,
}

/// Names accepted for `--engine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Engine {
    Analytic,
    Duhamel,
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "duhamel" => Ok(Self::Duhamel),
            _ => Err(format!("unknown engine `{s}` (analytic, duhamel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PayoffName {
    One,
    Linear,
    PutOnRate,
}

impl FromStr for PayoffName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "one" => Ok(Self::One),
            "linear" => Ok(Self::Linear),
            "put-on-rate" => Ok(Self::PutOnRate),
            _ => Err(format!("unknown payoff `{s}` (one, linear, put-on-rate)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MeasureName {
    P,
    PTilde,
}

impl FromStr for MeasureName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "P" | "p" => Ok(Self::P),
            "P-tilde" | "p-tilde" | "P_tilde" => Ok(Self::PTilde),
            _ => Err(format!("unknown measure `{s}` (P, P-tilde)")),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let layers = Layers::load(cli.config.as_deref(), cli.preset)?;
    let output: Option<PathBuf> = layers.get(cli.output, "output")?;
    let report = match cli.command {
        Command::Classify(args) => commands::classify(&layers, args)?,
        Command::Eigen(args) => commands::eigen(&layers, args)?,
        Command::Density(args) => commands::density(&layers, args)?,
        Command::Bond(args) | Command::Yield(args) => commands::curve(&layers, args)?,
        Command::Price(args) => commands::price(&layers, args)?,
        Command::Simulate(args) => commands::simulate(&layers, args)?,
        Command::CompareMeasures(args) => commands::compare(&layers, args)?,
    };
    output::emit(output.as_deref(), &report.text)?;
    match report.failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Consistency(msg)),
    }
}
