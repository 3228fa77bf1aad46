use std::f64::consts::PI;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;

use rodeo_core::optimizer::{schedule_fit, spectral_gap, ScheduleFitParams};

use crate::inputs::{log_grid, optimization_config, SpectrumArgs};
use crate::output::{num, text, Report, Table};
use crate::Cli;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub spectrum: SpectrumArgs,

    #[arg(long, default_value_t = 100)]
    pub n_samples: usize,

    #[arg(long, conflicts_with = "t_over_t0")]
    pub total_time: Option<f64>,

    #[arg(long)]
    pub t_over_t0: Option<f64>,

    /// Trotter step; times are rounded down to its multiples.
    #[arg(long, conflicts_with = "dt_over_t0")]
    pub trotter_dt: Option<f64>,

    #[arg(long)]
    pub dt_over_t0: Option<f64>,

    /// Sweep T over [0.1, 10]·T₀ (--points log-spaced) for each step in
    /// --sweep-dt; single-point time flags are ignored.
    #[arg(long)]
    pub sweep: bool,

    #[arg(long, default_value_t = 20)]
    pub points: usize,

    /// Trotter steps of the sweep, in units of T₀.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1, 1.0])]
    pub sweep_dt: Vec<f64>,
}

pub fn run(cli: &Cli, args: &Args) -> Result<Report> {
    let spec = args.spectrum.resolve()?;
    let target = args.spectrum.target;
    let t0 = PI / spectral_gap(&spec, target)?;
    let cfg = optimization_config(cli);
    let quad = args.spectrum.quad();

    let cases: Vec<(f64, f64)> = if args.sweep {
        let grid = log_grid(0.1 * t0, 10.0 * t0, args.points)?;
        args.sweep_dt
            .iter()
            .flat_map(|dt| grid.iter().map(move |t| (*t, dt * t0)))
            .collect()
    } else {
        let t = match (args.total_time, args.t_over_t0) {
            (Some(t), _) => t,
            (None, Some(r)) => r * t0,
            (None, None) => bail!("give --total-time or --t-over-t0, or --sweep"),
        };
        let dt = match (args.trotter_dt, args.dt_over_t0) {
            (Some(d), _) => d,
            (None, Some(r)) => r * t0,
            (None, None) => bail!("give --trotter-dt or --dt-over-t0"),
        };
        vec![(t, dt)]
    };

    let mut table = Table::new([
        "T",
        "T_over_T0",
        "dt",
        "alpha_opt",
        "zeta",
        "flat",
        "converged",
        "status",
        "times",
    ]);
    let mut fits = Vec::new();
    let mut converged = true;
    for (t, dt) in cases {
        let params = ScheduleFitParams {
            target,
            total_time: t,
            trotter_dt: dt,
            n_samples: args.n_samples,
        };
        if dt >= t {
            if !args.sweep {
                bail!("Trotter step {dt} must be below the total time {t}");
            }
            table.push(vec![
                num(t),
                num(t / t0),
                num(dt),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "step_exceeds_total_time".into(),
                String::new(),
            ]);
            continue;
        }
        let fit = schedule_fit(&spec, &params, &cfg, &quad)?;
        converged &= fit.converged;
        let times = fit.schedule.times().iter().map(|v| num(*v)).collect::<Vec<_>>().join(";");
        table.push(vec![
            num(t),
            num(t / t0),
            num(dt),
            num(fit.alpha),
            num(fit.zeta),
            text(fit.flat),
            text(fit.converged),
            "ok".into(),
            times,
        ]);
        fits.push(json!({ "T": t, "dt": dt, "fit": fit }));
    }
    let mut report = Report::new(table, json!({ "t0": t0, "target": target, "fits": fits }));
    report.converged = converged;
    report.t0 = Some(t0);
    Ok(report)
}
