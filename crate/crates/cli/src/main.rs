//! `taylor-gmrf`: coefficients, covariances, precision matrices, factors,
//! samples and experiments as CSV/JSON data files.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{merge, read_config_file, CommandKind, ExperimentConfig, RawConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "taylor-gmrf", version, about = "Sparse GMRF approximations of fractional Matérn fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor coefficients of the spectrum as JSON.
    Coeffs(Options),
    /// Covariance curves (exact, band_limited, taylor, discrete, interpolated) as CSV.
    Covariance(Options),
    /// Sparse precision matrix in coordinate form.
    Assemble(Options),
    /// Cholesky factor of the precision matrix in coordinate form.
    Factor(Options),
    /// Field realizations as CSV grids.
    Sample(Options),
    /// Lattice against continuous covariance over a sequence of steps h.
    Convergence(Options),
    /// Maximum covariance error as a function of the Taylor order.
    ErrorVsOrder(Options),
}

/// Every option may also be given in the configuration file as
/// `key = value`, with dashes written as underscores. Flags win.
#[derive(Args, Debug, Default)]
struct Options {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Smoothness α (accepts `pi`).
    #[arg(long)]
    alpha: Option<String>,
    /// Inverse length scale κ.
    #[arg(long)]
    kappa: Option<String>,
    /// Variance parameter σ².
    #[arg(long)]
    sigma2: Option<String>,
    /// Spatial dimension.
    #[arg(long)]
    d: Option<String>,
    /// Taylor order K.
    #[arg(long, visible_alias = "K")]
    order: Option<String>,
    /// Truncation depth J; selects K = ⌊α⌋ + 2J + 1.
    #[arg(long = "J", visible_alias = "j")]
    j: Option<String>,
    /// Lattice step.
    #[arg(long)]
    h: Option<String>,
    /// Points per axis (one value or one per axis).
    #[arg(long)]
    n: Option<String>,
    /// Domain side; sets n = side/h + 1.
    #[arg(long)]
    side: Option<String>,
    /// `periodic` or `periodic_extended(F)`.
    #[arg(long)]
    boundary: Option<String>,
    /// Symbol mode: `separable` or `laplacian_power`.
    #[arg(long)]
    mode: Option<String>,
    /// Reference for error-vs-order: `exact` or `band_limited`.
    #[arg(long)]
    target: Option<String>,
    /// Comma list of covariance kinds.
    #[arg(long)]
    kinds: Option<String>,
    /// Lags as `start:stop:step` or a comma list.
    #[arg(long)]
    lags: Option<String>,
    /// Orders as `first:last` or a comma list.
    #[arg(long)]
    orders: Option<String>,
    /// Steps h for the convergence study.
    #[arg(long)]
    steps: Option<String>,
    /// Domain sides for a sensitivity scan.
    #[arg(long)]
    sides: Option<String>,
    /// Boundary extension factors for a sensitivity scan.
    #[arg(long)]
    factors: Option<String>,
    /// Random seed.
    #[arg(long)]
    seed: Option<String>,
    /// Number of realizations.
    #[arg(long)]
    count: Option<String>,
    /// Unknown ordering: `auto`, `natural` or `folded`.
    #[arg(long)]
    ordering: Option<String>,
    /// Positive part: `auto`, `updates` or `direct`.
    #[arg(long)]
    positive_init: Option<String>,
    /// `positives_first` or `interleaved`.
    #[arg(long)]
    update_order: Option<String>,
    /// Factor form: `plain` or `unit`.
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    abs_tol: Option<String>,
    /// Frequency points per axis for single lattice covariances.
    #[arg(long)]
    lattice_points: Option<String>,
    /// Output file; stdout when absent or `-`.
    #[arg(short, long)]
    output: Option<String>,
}

impl Options {
    fn flags(self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("sigma2", self.sigma2),
            ("d", self.d),
            ("order", self.order),
            ("j", self.j),
            ("h", self.h),
            ("n", self.n),
            ("side", self.side),
            ("boundary", self.boundary),
            ("mode", self.mode),
            ("target", self.target),
            ("kinds", self.kinds),
            ("lags", self.lags),
            ("orders", self.orders),
            ("steps", self.steps),
            ("sides", self.sides),
            ("factors", self.factors),
            ("seed", self.seed),
            ("count", self.count),
            ("ordering", self.ordering),
            ("positive_init", self.positive_init),
            ("update_order", self.update_order),
            ("form", self.form),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("lattice_points", self.lattice_points),
            ("output", self.output),
        ]
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, mut options) = match cli.command {
        Command::Coeffs(o) => (CommandKind::Coeffs, o),
        Command::Covariance(o) => (CommandKind::Covariance, o),
        Command::Assemble(o) => (CommandKind::Assemble, o),
        Command::Factor(o) => (CommandKind::Factor, o),
        Command::Sample(o) => (CommandKind::Sample, o),
        Command::Convergence(o) => (CommandKind::Convergence, o),
        Command::ErrorVsOrder(o) => (CommandKind::ErrorVsOrder, o),
    };
    let file = match options.config.take() {
        Some(path) => read_config_file(&path)?,
        None => RawConfig::new(),
    };
    let raw = merge(file, &options.flags())?;
    let config = ExperimentConfig::resolve(kind, &raw)?;
    match kind {
        CommandKind::Coeffs => commands::coeffs(&config),
        CommandKind::Covariance => commands::covariance(&config),
        CommandKind::Assemble => commands::assemble(&config),
        CommandKind::Factor => commands::factor(&config),
        CommandKind::Sample => commands::sample(&config),
        CommandKind::Convergence => commands::convergence_cmd(&config),
        CommandKind::ErrorVsOrder => commands::error_vs_order_cmd(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("taylor-gmrf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
