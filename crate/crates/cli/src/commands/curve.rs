use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;

use rodeo_core::optimizer::{adaptive_alpha_curve, optimize_rra_sigma};
use rodeo_core::schedules::superiteration_schedule;
use rodeo_core::{SuperiterationParams, TimeSchedule};

use crate::inputs::{log_grid, optimization_config, Backend, ModelArgs, SpectrumArgs};
use crate::output::{num, text, Report, Table};
use crate::Cli;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub spectrum: SpectrumArgs,

    #[arg(long, default_value_t = 100)]
    pub n_samples: usize,

    /// Smallest total time, in units of T₀.
    #[arg(long, default_value_t = 0.1)]
    pub t_min: f64,

    /// Largest total time, in units of T₀.
    #[arg(long, default_value_t = 20.0)]
    pub t_max: f64,

    #[arg(long, default_value_t = 20)]
    pub points: usize,

    /// Explicit total times in units of T₀; overrides the log grid. May include 0.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,

    /// Fixed geometric ratios to compare.
    #[arg(long, value_delimiter = ',', default_values_t = [1.2, 1.5, 2.0])]
    pub alphas: Vec<f64>,

    #[arg(long, default_value_t = 1.0)]
    pub alpha_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub alpha_max: f64,

    /// Cap each α search by the previous optimum.
    #[arg(long)]
    pub monotone: bool,

    /// Add the optimized half-Gaussian random schedule baseline.
    #[arg(long)]
    pub rra: bool,

    /// Random schedules per σ for --rra.
    #[arg(long, default_value_t = 200)]
    pub shots: usize,
}

fn fixed(alpha: f64, n: usize, t: f64) -> Result<TimeSchedule> {
    Ok(superiteration_schedule(&SuperiterationParams::new(alpha, n, t)?)?)
}

pub fn run(cli: &Cli, args: &Args) -> Result<Report> {
    let backend = Backend::from_args(&args.model, &args.spectrum)?;
    let t0 = backend.t0()?;
    let ratios = match &args.t_grid {
        Some(g) => g.clone(),
        None => log_grid(args.t_min, args.t_max, args.points)?,
    };
    if ratios.iter().any(|r| r.is_nan() || *r < 0.0) || ratios.windows(2).any(|w| w[1] < w[0]) {
        bail!("total-time grid must be nonnegative and ascending");
    }
    let n = args.n_samples;
    let raw = cli.raw_fidelity;
    let mut cfg = optimization_config(cli);
    cfg.alpha_bounds = (args.alpha_min, args.alpha_max);
    cfg.shots = args.shots;

    let positive: Vec<f64> = ratios.iter().filter(|r| **r > 0.0).map(|r| r * t0).collect();
    let objective = |_: f64, s: &TimeSchedule| backend.objective(s);
    let curve = adaptive_alpha_curve(&objective, n, &positive, args.monotone, &cfg)?;

    let metric = backend.metric_name(raw);
    let mut header = vec![
        "T".to_string(),
        "T_over_T0".to_string(),
        "alpha_opt".to_string(),
        format!("{metric}_adaptive"),
    ];
    header.extend(args.alphas.iter().map(|a| format!("{metric}_alpha_{a}")));
    if args.rra {
        header.extend(
            ["rra_sigma", "rra_cycles", &format!("{metric}_rra_mean"), "rra_std_error"].map(String::from),
        );
    }
    let mut table = Table::new(header);
    let mut alpha_table = Table::new(["T", "alpha_opt", "objective", "flat"]);
    let mut shots_table = Table::new(["T", "shot", metric]);
    let mut points = Vec::new();
    let empty = TimeSchedule::empty();
    let mut curve_iter = curve.iter();

    for &r in &ratios {
        let t = r * t0;
        let mut row = vec![num(t), num(r)];
        let mut point = json!({ "T": t, "T_over_T0": r });
        if r == 0.0 {
            let m = backend.metric(&empty, raw);
            row.push(String::new());
            row.push(num(m));
            row.extend(args.alphas.iter().map(|_| num(m)));
            if args.rra {
                row.extend([String::new(), "0".into(), num(m), num(0.0)]);
            }
            point["adaptive"] = json!(m);
            table.push(row);
            points.push(point);
            continue;
        }
        let p = curve_iter.next().expect("one curve point per positive time");
        let adaptive = backend.metric(&fixed(p.alpha_opt, n, t)?, raw);
        row.push(num(p.alpha_opt));
        row.push(num(adaptive));
        alpha_table.push(vec![num(t), num(p.alpha_opt), num(p.objective), text(p.flat)]);
        let mut fixed_values = Vec::new();
        for &a in &args.alphas {
            let v = backend.metric(&fixed(a, n, t)?, raw);
            fixed_values.push(v);
            row.push(num(v));
        }
        point["alpha_opt"] = json!(p.alpha_opt);
        point["adaptive"] = json!(adaptive);
        point["fixed"] = json!(fixed_values);
        if args.rra {
            let obj = |s: &TimeSchedule| backend.objective(s);
            let rra = optimize_rra_sigma(&obj, n, t, &cfg)?;
            let shots: Vec<f64> = rra.shots.iter().map(|o| backend.metric_from_objective(*o, raw)).collect();
            let mean = shots.iter().sum::<f64>() / shots.len() as f64;
            for (i, s) in shots.iter().enumerate() {
                shots_table.push(vec![num(t), i.to_string(), num(*s)]);
            }
            row.extend([num(rra.sigma), rra.n_cycles.to_string(), num(mean), num(rra.std_error)]);
            point["rra"] = json!({ "sigma": rra.sigma, "cycles": rra.n_cycles, "mean": mean, "std_error": rra.std_error });
        }
        table.push(row);
        points.push(point);
    }

    let json = json!({ "t0": t0, "metric": metric, "alphas": args.alphas, "points": points });
    let mut report = Report::new(table, json);
    report.extra.push(("alpha", alpha_table));
    if args.rra {
        report.extra.push(("rra_shots", shots_table));
    }
    report.converged = backend.quadrature_failures() == 0;
    report.t0 = Some(t0);
    Ok(report)
}
