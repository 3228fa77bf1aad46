//! `rodeo`: command-line front end for rodeo-core.
//!
//! Every command writes CSV or JSON. With `--out <path>` a
//! `<path>.manifest.json` is written next to the data; it records the
//! resolved parameters, seed and tool version needed to re-run the command.
//! Exit status is 0 when every computation converged, 2 when outputs were
//! written but something did not converge, and 1 on errors.

mod commands;
mod config;
mod inputs;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::output::Format;

#[derive(Debug, Parser, Serialize)]
#[command(name = "rodeo", version, about = "Rodeo algorithm time-schedule tools", args_override_self = true)]
pub struct Cli {
    /// JSON file supplying any flag by name; command-line flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<std::path::PathBuf>,

    /// Output file. Without it data goes to stdout and no manifest is written.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<std::path::PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Objective evaluations for N-dimensional time optimization.
    #[arg(long, global = true)]
    pub budget: Option<usize>,

    #[arg(long, global = true)]
    pub restarts: Option<usize>,

    /// Report `|⟨ψ′|ψ₀⟩|²` of the unnormalized output state instead of the
    /// post-selected fidelity.
    #[arg(long, global = true)]
    pub raw_fidelity: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Residual spectral norm of a schedule, by closed form and quadrature.
    Rsn(commands::rsn::Args),
    /// Optimize every time of an N-sample schedule on a flat band.
    OptimizeTimes(commands::optimize::TimesArgs),
    /// Optimize the geometric ratio at one total time.
    OptimizeAlpha(commands::optimize::AlphaArgs),
    /// Fidelity or residual norm against total time for fixed, adaptive and random schedules.
    Curve(commands::curve::Args),
    /// The cosine product C(α, θ, N) over a θ grid.
    ProductFunction(commands::asymptotic::ProductArgs),
    /// Power-law decay exponent of the product envelope.
    DecayFit(commands::asymptotic::DecayArgs),
    /// Optimized 10-sample schedules on the band [0.1, 1] at T₀/2, T₀, 2T₀ and 3T₀.
    Table1(commands::optimize::Table1Args),
    /// Best geometric ratio for Trotter-rounded schedules on a spectral function.
    ScheduleFit(commands::schedule_fit::Args),
    /// Eigenvalues and initial-state overlaps of a spin-chain sector.
    Spectrum(commands::spectrum::Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rsn(_) => "rsn",
            Command::OptimizeTimes(_) => "optimize-times",
            Command::OptimizeAlpha(_) => "optimize-alpha",
            Command::Curve(_) => "curve",
            Command::ProductFunction(_) => "product-function",
            Command::DecayFit(_) => "decay-fit",
            Command::Table1(_) => "table1",
            Command::ScheduleFit(_) => "schedule-fit",
            Command::Spectrum(_) => "spectrum",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::parse_from(argv);
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some computations did not converge; outputs are partial");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
