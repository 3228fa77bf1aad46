use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;

use rodeo_core::asymptotics::{
    fit_decay_exponent, fourier_expansion, product_function, product_function_limit, ProductQuery, GOLDEN_RATIO,
    MAX_FOURIER_TERMS,
};

use crate::output::{num, text, Report, Table};

#[derive(Debug, clap::Args, Serialize)]
pub struct ProductArgs {
    #[arg(long)]
    pub alpha: f64,

    #[arg(long, default_value_t = 0.1)]
    pub theta_min: f64,

    #[arg(long, default_value_t = 100.0)]
    pub theta_max: f64,

    #[arg(long, default_value_t = 1000)]
    pub points: usize,

    /// Factors in the product; without it the product runs until the
    /// remaining factors are 1 to double precision.
    #[arg(long)]
    pub n_terms: Option<usize>,

    /// Also evaluate the Fourier expansion (needs --n-terms ≤ 24).
    #[arg(long)]
    pub fourier: bool,

    /// Factor cap when --n-terms is absent.
    #[arg(long, default_value_t = 400)]
    pub n_limit: usize,
}

pub fn run_product(args: &ProductArgs) -> Result<Report> {
    if args.points < 2 || args.theta_max.partial_cmp(&args.theta_min) != Some(std::cmp::Ordering::Greater) {
        bail!("need at least two points and --theta-max > --theta-min");
    }
    if args.fourier && !args.n_terms.is_some_and(|n| n <= MAX_FOURIER_TERMS) {
        bail!("--fourier needs --n-terms of at most {MAX_FOURIER_TERMS}");
    }
    let mut header = vec!["theta", "product"];
    if args.fourier {
        header.push("fourier");
    }
    let mut table = Table::new(header);
    let mut values = Vec::with_capacity(args.points);
    let step = (args.theta_max - args.theta_min) / (args.points - 1) as f64;
    for i in 0..args.points {
        let theta = args.theta_min + step * i as f64;
        let c = match args.n_terms {
            Some(n) => product_function(&ProductQuery::new(args.alpha, theta, n)?)?,
            None => product_function_limit(args.alpha, theta, args.n_limit)?,
        };
        let mut row = vec![num(theta), num(c)];
        if let Some(n) = args.n_terms.filter(|_| args.fourier) {
            row.push(num(fourier_expansion(&ProductQuery::new(args.alpha, theta, n)?)?));
        }
        values.push([theta, c]);
        table.push(row);
    }
    Ok(Report::new(table, json!({ "alpha": args.alpha, "n_terms": args.n_terms, "values": values })))
}

#[derive(Debug, clap::Args, Serialize)]
pub struct DecayArgs {
    /// Ratios to fit.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, GOLDEN_RATIO])]
    pub alphas: Vec<f64>,

    /// Upper end of the θ range; the fit covers [θ_max/100, θ_max].
    #[arg(long, default_value_t = 1e4)]
    pub theta_max: f64,

    #[arg(long, default_value_t = 400)]
    pub n_limit: usize,
}

pub fn run_decay(args: &DecayArgs) -> Result<Report> {
    let mut table = Table::new([
        "alpha",
        "gamma",
        "residual",
        "non_decaying",
        "theta_min",
        "theta_max",
        "final_envelope",
    ]);
    let mut envelope = Table::new(["alpha", "theta", "envelope"]);
    let mut fits = Vec::new();
    for &alpha in &args.alphas {
        let fit = fit_decay_exponent(alpha, args.theta_max, args.n_limit)?;
        table.push(vec![
            num(alpha),
            num(fit.gamma),
            num(fit.residual),
            text(fit.non_decaying),
            num(fit.theta_range.0),
            num(fit.theta_range.1),
            num(fit.final_envelope()),
        ]);
        for (theta, c) in &fit.envelope {
            envelope.push(vec![num(alpha), num(*theta), num(*c)]);
        }
        fits.push(fit);
    }
    let mut report = Report::new(table, json!({ "fits": fits }));
    report.extra.push(("envelope", envelope));
    Ok(report)
}
