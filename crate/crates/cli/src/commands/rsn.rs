use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use rodeo_core::closed_form::{rsn_closed_form, rsn_unit_density};
use rodeo_core::spectral::{self, RodeoResult};

use crate::inputs::{closed_form_band, ScheduleArgs, SpectrumArgs};
use crate::output::{num, opt_num, Report, Table};
use crate::Cli;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

pub fn run(cli: &Cli, args: &Args) -> Result<Report> {
    let spec = args.spectrum.resolve()?;
    let target = args.spectrum.target;
    let sched = args.schedule.resolve(cli.seed)?;
    let band = closed_form_band(&spec, target);
    let closed = band.and_then(|b| rsn_closed_form(&b, &sched).ok());
    let unit = band.and_then(|b| rsn_unit_density(&b, &sched).ok());

    let (quad, converged, quad_error) = match spectral::rsn_quadrature_with(&spec, target, &sched, &args.spectrum.quad()) {
        Ok(z) => (z, true, None),
        Err(e) => (e.estimate, false, Some(e.error)),
    };
    let discrepancy = closed.map(|c| if quad == 0.0 { (c - quad).abs() } else { ((c - quad) / quad).abs() });
    let zeta = closed.unwrap_or(quad);
    let tw = args.spectrum.target_weight.or(match spec {
        rodeo_core::SpectralFunction::Discrete { .. } => Some(spec.target_weight(target)),
        _ => None,
    });
    let result = RodeoResult::new(tw, zeta);
    let fidelity = if cli.raw_fidelity { result.raw_fidelity } else { result.fidelity };

    let mut table = Table::new([
        "n_times",
        "total_time",
        "zeta_closed_form",
        "zeta_quadrature",
        "relative_discrepancy",
        "zeta_unit_density",
        if cli.raw_fidelity { "raw_fidelity" } else { "fidelity" },
        "success_probability",
    ]);
    table.push(vec![
        sched.len().to_string(),
        num(sched.total_time()),
        opt_num(closed),
        num(quad),
        opt_num(discrepancy),
        opt_num(unit),
        opt_num(fidelity),
        if tw.is_some() { num(result.success_probability) } else { String::new() },
    ]);
    let json = json!({
        "schedule": sched.times(),
        "zeta_closed_form": closed,
        "zeta_quadrature": quad,
        "quadrature_error": quad_error,
        "relative_discrepancy": discrepancy,
        "zeta_unit_density": unit,
        "fidelity": result.fidelity,
        "raw_fidelity": result.raw_fidelity,
        "success_probability": tw.map(|_| result.success_probability),
    });
    let mut report = Report::new(table, json);
    report.converged = converged;
    Ok(report)
}
