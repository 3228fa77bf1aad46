use std::f64::consts::PI;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use rodeo_core::TimeSchedule;

use crate::inputs::ModelArgs;
use crate::output::{num, Report, Table};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn run(args: &Args) -> Result<Report> {
    let sys = args.model.system()?.context("spectrum needs --model")?;
    let mut table = Table::new(["index", "energy", "amplitude", "weight"]);
    for (i, (e, w)) in sys.eig.eigenvalues.iter().zip(&sys.overlaps).enumerate() {
        table.push(vec![i.to_string(), num(*e), num(*w), num(w * w)]);
    }
    let gap = sys.eig.gap();
    let initial = sys.spectrum.evaluate(&TimeSchedule::empty());
    let json = json!({
        "hamiltonian": sys.spec,
        "sector_dim": sys.eig.sector_dim,
        "ground_energy": sys.eig.ground_energy(),
        "gap": gap,
        "t0": gap.map(|g| PI / g),
        "initial_fidelity": initial.fidelity,
        "eigenvalues": sys.eig.eigenvalues.as_slice(),
        "amplitudes": sys.overlaps,
    });
    let mut report = Report::new(table, json);
    report.t0 = gap.map(|g| PI / g);
    Ok(report)
}
