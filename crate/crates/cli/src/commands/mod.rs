pub mod asymptotic;
pub mod curve;
pub mod optimize;
pub mod rsn;
pub mod schedule_fit;
pub mod spectrum;

use std::time::Instant;

use anyhow::Result;

use crate::output::{self, Report};
use crate::{Cli, Command};

/// Runs the selected command and writes its outputs. Returns whether every
/// computation converged.
pub fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let report: Report = match &cli.command {
        Command::Rsn(a) => rsn::run(cli, a)?,
        Command::OptimizeTimes(a) => optimize::run_times(cli, a)?,
        Command::OptimizeAlpha(a) => optimize::run_alpha(cli, a)?,
        Command::Curve(a) => curve::run(cli, a)?,
        Command::ProductFunction(a) => asymptotic::run_product(a)?,
        Command::DecayFit(a) => asymptotic::run_decay(a)?,
        Command::Table1(a) => optimize::run_table1(cli, a)?,
        Command::ScheduleFit(a) => schedule_fit::run(cli, a)?,
        Command::Spectrum(a) => spectrum::run(a)?,
    };
    let parameters = serde_json::to_value(cli)?;
    output::emit(
        &report,
        cli.command.name(),
        parameters,
        cli.seed,
        cli.format,
        cli.out.as_deref(),
        start.elapsed(),
    )?;
    Ok(report.converged)
}
