use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;

use rodeo_core::closed_form::unit_density_scale;
use rodeo_core::optimizer::{optimize_alpha, optimize_times, OptimizationResult};
use rodeo_core::schedules::superiteration_schedule;
use rodeo_core::{BandModel, SuperiterationParams, TimeSchedule};

use crate::inputs::{optimization_config, Backend, ModelArgs, SpectrumArgs};
use crate::output::{num, text, Report, Table};
use crate::Cli;

/// Total time given directly or in units of T₀.
#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct TotalTime {
    #[arg(long, conflicts_with = "t_over_t0")]
    pub total_time: Option<f64>,

    #[arg(long)]
    pub t_over_t0: Option<f64>,
}

impl TotalTime {
    pub fn resolve(&self, t0: f64) -> Result<f64> {
        match (self.total_time, self.t_over_t0) {
            (Some(t), _) => Ok(t),
            (None, Some(r)) => Ok(r * t0),
            (None, None) => bail!("give --total-time or --t-over-t0"),
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct TimesArgs {
    #[arg(long, default_value_t = 0.1)]
    pub band_min: f64,

    #[arg(long, default_value_t = 1.0)]
    pub band_max: f64,

    #[arg(long, default_value_t = 10)]
    pub n_samples: usize,

    #[command(flatten)]
    pub time: TotalTime,
}

fn joined(s: &TimeSchedule) -> String {
    s.times().iter().map(|t| num(*t)).collect::<Vec<_>>().join(";")
}

fn schedule_table(s: &TimeSchedule) -> Table {
    let mut t = Table::new(["n", "time"]);
    for (i, v) in s.times().iter().enumerate() {
        t.push(vec![(i + 1).to_string(), num(*v)]);
    }
    t
}

pub fn run_times(cli: &Cli, args: &TimesArgs) -> Result<Report> {
    let band = BandModel::new(args.band_min, args.band_max)?;
    let t0 = band.characteristic_time();
    let t_limit = args.time.resolve(t0)?;
    let cfg = optimization_config(cli);
    let r = optimize_times(&band, args.n_samples, t_limit, &cfg)?;
    let unit = unit_density_scale(&band) * r.best_objective;

    let mut table = Table::new([
        "t_limit",
        "t_over_t0",
        "zeta",
        "zeta_unit_density",
        "surviving_times",
        "evaluations",
        "converged",
        "times",
    ]);
    table.push(vec![
        num(t_limit),
        num(t_limit / t0),
        num(r.best_objective),
        num(unit),
        r.best_schedule.len().to_string(),
        r.evaluations_used.to_string(),
        text(r.converged),
        joined(&r.best_schedule),
    ]);
    let json = json!({
        "t0": t0,
        "t_limit": t_limit,
        "zeta": r.best_objective,
        "zeta_unit_density": unit,
        "schedule": r.best_schedule.times(),
        "evaluations": r.evaluations_used,
        "restart_bests": r.restart_bests,
        "converged": r.converged,
    });
    let mut report = Report::new(table, json);
    report.extra.push(("schedule", schedule_table(&r.best_schedule)));
    report.converged = r.converged;
    report.t0 = Some(t0);
    Ok(report)
}

#[derive(Debug, clap::Args, Serialize)]
pub struct AlphaArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub spectrum: SpectrumArgs,

    #[arg(long, default_value_t = 10)]
    pub n_samples: usize,

    #[command(flatten)]
    pub time: TotalTime,

    #[arg(long, default_value_t = 1.0)]
    pub alpha_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub alpha_max: f64,
}

pub fn run_alpha(cli: &Cli, args: &AlphaArgs) -> Result<Report> {
    let backend = Backend::from_args(&args.model, &args.spectrum)?;
    let t0 = backend.t0()?;
    let t = args.time.resolve(t0)?;
    let mut cfg = optimization_config(cli);
    cfg.alpha_bounds = (args.alpha_min, args.alpha_max);
    let objective = |s: &TimeSchedule| backend.objective(s);
    let best = optimize_alpha(&objective, args.n_samples, t, &cfg)?;
    let sched = superiteration_schedule(&SuperiterationParams::new(best.alpha, args.n_samples, t)?)?;
    let metric_name = backend.metric_name(cli.raw_fidelity);
    let metric = backend.metric(&sched, cli.raw_fidelity);

    let mut table = Table::new(["T", "T_over_T0", "alpha_opt", "objective", metric_name, "flat", "evaluations"]);
    table.push(vec![
        num(t),
        num(t / t0),
        num(best.alpha),
        num(best.objective),
        num(metric),
        text(best.flat),
        best.evaluations.to_string(),
    ]);
    let json = json!({
        "t0": t0,
        "total_time": t,
        "alpha_opt": best.alpha,
        "objective": best.objective,
        metric_name: metric,
        "flat": best.flat,
        "evaluations": best.evaluations,
        "schedule": sched.times(),
    });
    let mut report = Report::new(table, json);
    report.converged = backend.quadrature_failures() == 0;
    report.t0 = Some(t0);
    Ok(report)
}

/// Rows `(T/T₀, reference ζ)`; references are on the unit-density scale.
pub const TABLE1_ROWS: [(f64, f64); 4] = [(0.5, 0.153), (1.0, 0.0335), (2.0, 0.00161), (3.0, 7.42e-5)];

#[derive(Debug, clap::Args, Serialize)]
pub struct Table1Args {
    /// Independent optimizer seeds per row, starting at --seed; the best is reported.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,

    #[arg(long, default_value_t = 10)]
    pub n_samples: usize,
}

pub fn run_table1(cli: &Cli, args: &Table1Args) -> Result<Report> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let band = BandModel::new(0.1, 1.0)?;
    let t0 = band.characteristic_time();
    let scale = unit_density_scale(&band);
    let mut table = Table::new([
        "t_over_t0",
        "t_limit",
        "zeta",
        "zeta_unit_density",
        "reference_unit_density",
        "seed_spread",
        "surviving_times",
        "converged",
        "times",
    ]);
    let mut rows = Vec::new();
    let mut all_converged = true;
    for (ratio, reference) in TABLE1_ROWS {
        let runs: Vec<OptimizationResult> = (0..args.seeds)
            .map(|k| {
                let mut cfg = optimization_config(cli);
                cfg.seed = cli.seed + k;
                optimize_times(&band, args.n_samples, ratio * t0, &cfg)
            })
            .collect::<Result<_, _>>()?;
        let best = runs
            .iter()
            .min_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
            .expect("at least one seed");
        let worst = runs.iter().map(|r| r.best_objective).fold(0.0, f64::max);
        let spread = (worst - best.best_objective) / best.best_objective;
        all_converged &= best.converged;
        table.push(vec![
            num(ratio),
            num(ratio * t0),
            num(best.best_objective),
            num(scale * best.best_objective),
            num(reference),
            num(spread),
            best.best_schedule.len().to_string(),
            text(best.converged),
            joined(&best.best_schedule),
        ]);
        rows.push(json!({
            "t_over_t0": ratio,
            "t_limit": ratio * t0,
            "zeta": best.best_objective,
            "zeta_unit_density": scale * best.best_objective,
            "reference_unit_density": reference,
            "seed_spread": spread,
            "schedule": best.best_schedule.times(),
            "converged": best.converged,
        }));
    }
    let mut report = Report::new(table, json!({ "t0": t0, "rows": rows }));
    report.converged = all_converged;
    report.t0 = Some(t0);
    Ok(report)
}
