//! `wgini`: batch front end for estimation, sampling, figure data, pricing
//! and the numerical self-checks.

mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wgini::verify::Suite;
use wgini::{Orientation, WeightFunction};

#[derive(Debug, Parser)]
#[command(name = "wgini", version, about = "Weighted Gini correlations, bivariate Pareto families and Gini-type premiums")]
struct Cli {
    /// Master seed for sampling, bootstrap and Monte-Carlo replications.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (default: json for price, csv otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted Gini correlation from data or from a parametric family.
    Corr(CorrArgs),
    /// Draw a paired sample from a family.
    Sample(SampleArgs),
    /// Extended Gini and Pearson correlation of BVP2 across a range of δ.
    Curves(CurvesArgs),
    /// Joint decumulative distribution function on a rectangular grid.
    Surface(SurfaceArgs),
    /// Gini-type premiums for a portfolio, optionally allocated to its columns.
    Price(PriceArgs),
    /// Run the named numerical self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// normal, t, bvp1, bvp2 or bvp3.
    #[arg(long)]
    family: Option<String>,
    /// File holding a `family=<tag> key=value ...` block.
    #[arg(long, conflicts_with = "family")]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_xy: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_y: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_y: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_y: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    /// identity, power:γ, dual-power:γ or beta:a,b.
    #[arg(long, default_value = "power:1")]
    weight: WeightFunction,
    /// Tabulated weight: CSV of (t, w) knots, used instead of --weight.
    #[arg(long)]
    weight_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Empirical,
    Closed,
    Regression,
    Oracle,
    All,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// CSV of pairs (columns x,y or the first two columns).
    #[arg(long, conflicts_with_all = ["family", "config"])]
    data: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    weight: WeightArgs,
    /// Default: empirical with --data, closed with a family.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Sample size for the empirical and oracle methods on a family.
    #[arg(short = 'n', long = "n", default_value_t = 200_000)]
    n: usize,
    /// Bootstrap resamples for the empirical standard error (0 disables it).
    #[arg(long, default_value_t = 200)]
    resamples: usize,
    /// Monte-Carlo replications for the oracle method.
    #[arg(long, default_value_t = 20)]
    replications: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(short = 'n', long = "n", default_value_t = 1000)]
    n: usize,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, default_value_t = 0.5254)]
    delta_y: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2.05)]
    delta_min: f64,
    #[arg(long, default_value_t = 10.0)]
    delta_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 80)]
    steps: usize,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y_max: Option<f64>,
    #[arg(long, default_value_t = 21)]
    nx: usize,
    #[arg(long, default_value_t = 21)]
    ny: usize,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Portfolio CSV with a header row naming the risks.
    portfolio: PathBuf,
    #[command(flatten)]
    weight: WeightArgs,
    /// Price each column against the aggregate instead of stand-alone.
    #[arg(long)]
    allocate: bool,
    /// survival prices with w(1 - F(S)), dual with 1 - w(F(S)).
    #[arg(long, default_value_t = Orientation::Survival)]
    orientation: Orientation,
    /// Bootstrap resamples for stand-alone standard errors (0 disables them).
    #[arg(long, default_value_t = 200)]
    resamples: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// specfun, distributions, gini, wipm or all.
    #[arg(default_value = "all")]
    suite: Suite,
}

fn write_output(cli: &Cli, table: &output::Table) -> io::Result<()> {
    let format = cli.format.unwrap_or(match cli.command {
        Command::Price(_) => Format::Json,
        _ => Format::Csv,
    });
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match format {
        Format::Csv => table.write_csv(&mut sink)?,
        Format::Json => table.write_json(&mut sink)?,
    }
    sink.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        seed: cli.seed,
        invocation: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
    };
    let result = match &cli.command {
        Command::Corr(a) => commands::corr(&ctx, a).map(|t| (t, true)),
        Command::Sample(a) => commands::sample(&ctx, a).map(|t| (t, true)),
        Command::Curves(a) => commands::curves(&ctx, a).map(|t| (t, true)),
        Command::Surface(a) => commands::surface(&ctx, a).map(|t| (t, true)),
        Command::Price(a) => commands::price(&ctx, a).map(|t| (t, true)),
        Command::Verify(a) => commands::verify(&ctx, a),
    };
    match result {
        Ok((table, ok)) => {
            if let Err(e) = write_output(&cli, &table) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}
