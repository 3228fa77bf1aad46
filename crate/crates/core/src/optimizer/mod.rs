//! Derivative-free schedule optimization.
//!
//! * [`optimize_times`]: all `N` times free under `Σtₙ ≤ T`, by CMA-ES with
//!   restarts on `tₙ = xₙ²`.
//! * [`optimize_alpha`]: the geometric ratio of a superiteration schedule,
//!   by a log-spaced grid scan and golden-section refinement.
//! * [`adaptive_alpha_curve`]: `α_opt` along a grid of total times.
//! * [`optimize_rra_sigma`]: the width of half-Gaussian random schedules.
//! * [`schedule_fit`]: `α_opt` for Trotter-rounded schedules on a general
//!   spectral function.

pub mod cmaes;
pub mod scalar;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{self, BandModel, CLOSED_FORM_LIMIT};
use crate::hamiltonians::OverlapSpectrum;
use crate::numeric::{CompensatedSum, QuadConfig};
use crate::parallel;
use crate::schedules::{half_normal, rng_stream, superiteration_schedule, trotter_round, SuperiterationParams};
use crate::spectral::{self, Band, Density, SpectralFunction, TimeSchedule};
use crate::{domain, Error, Result};

use scalar::{argmin_with_ties, golden_section, log_offsets};

/// Fewest objective evaluations a single restart may be given.
pub const MIN_EVALS_PER_RESTART: usize = 100;

/// Smallest `α − α_low` on the scan grid, as a fraction of the bound width.
const ALPHA_GRID_MIN_FRACTION: f64 = 1e-4;

/// Objective over schedules.
pub type Objective<'a> = dyn Fn(&TimeSchedule) -> f64 + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationConfig {
    /// Maximum objective evaluations for [`optimize_times`].
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Relative objective tolerance for convergence, ties and flatness.
    pub tolerance: f64,
    /// `α` search interval `(low, high]`.
    pub alpha_bounds: (f64, f64),
    /// Reported schedules drop entries below this.
    pub time_floor: f64,
    /// Grid points of the `α` scan.
    pub alpha_grid_points: usize,
    /// Grid points of the `σ` scan.
    pub sigma_grid_points: usize,
    /// Random schedules per `σ` value.
    pub shots: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            budget: 60_000,
            restarts: 5,
            seed: 0,
            tolerance: 1e-9,
            alpha_bounds: (1.0, 2.0),
            time_floor: spectral::TIME_FLOOR,
            alpha_grid_points: 200,
            sigma_grid_points: 60,
            shots: 200,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return domain("restarts must be at least 1");
        }
        if self.budget < self.restarts * MIN_EVALS_PER_RESTART {
            return domain(format!(
                "budget {} is below {} evaluations per restart",
                self.budget, MIN_EVALS_PER_RESTART
            ));
        }
        let (lo, hi) = self.alpha_bounds;
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return domain(format!("alpha bounds must satisfy 1 <= low <= high, got ({lo}, {hi})"));
        }
        if self.alpha_grid_points < 200 {
            return domain("alpha scan needs at least 200 grid points");
        }
        if self.sigma_grid_points < 2 || self.shots == 0 {
            return domain("sigma scan needs at least 2 grid points and 1 shot");
        }
        if !(self.tolerance >= 0.0 && self.time_floor >= 0.0) {
            return domain("tolerance and time floor must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_schedule: TimeSchedule,
    pub best_objective: f64,
    pub evaluations_used: usize,
    pub restart_bests: Vec<f64>,
    pub converged: bool,
}

fn floor_schedule(times: Vec<f64>, floor: f64) -> TimeSchedule {
    TimeSchedule::new(times.into_iter().filter(|&t| t >= floor).collect())
        .expect("squares are finite and nonnegative")
}

/// `tₙ = xₙ²`, scaled down onto `Σtₙ = T` when the sum exceeds `T`.
fn times_from_point(x: &[f64], t_limit: f64) -> Vec<f64> {
    let mut t: Vec<f64> = x.iter().map(|v| v * v).collect();
    let sum: f64 = t.iter().sum();
    if sum > t_limit {
        let s = t_limit / sum;
        for v in &mut t {
            *v *= s;
        }
    }
    t
}

/// Minimizes `objective` over schedules of `n` times with `Σtₙ ≤ t_limit`.
/// The first restart starts from `start` when given, later ones from
/// random points.
pub fn optimize_schedule(
    objective: &Objective<'_>,
    n: usize,
    t_limit: f64,
    start: Option<&TimeSchedule>,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if n == 0 {
        return domain("need at least one time sample");
    }
    if !(t_limit > 0.0 && t_limit.is_finite()) {
        return domain(format!("total time limit must be positive, got {t_limit}"));
    }
    let floor = cfg.time_floor;
    let f = |x: &[f64]| objective(&floor_schedule(times_from_point(x, t_limit), floor));
    let scale = (t_limit / n as f64).sqrt();
    let seeded: Option<Vec<f64>> = start.map(|s| {
        let mut x: Vec<f64> = s.times().iter().map(|t| t.sqrt()).collect();
        x.resize(n, 0.0);
        x.truncate(n);
        x
    });
    let start_fn = |r: usize, rng: &mut rand_chacha::ChaCha8Rng| -> (Vec<f64>, f64) {
        match (&seeded, r) {
            (Some(x), 0) => (x.clone(), 0.1 * scale),
            _ => {
                let x = (0..n).map(|_| scale * (0.2 + 1.6 * rng.random::<f64>())).collect();
                (x, 0.3 * scale)
            }
        }
    };
    let settings = cmaes::CmaSettings {
        budget: cfg.budget,
        restarts: cfg.restarts,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
    };
    let out = cmaes::minimize(&f, &start_fn, &settings);
    let best_schedule = floor_schedule(times_from_point(&out.best_x, t_limit), floor);
    let best_objective = objective(&best_schedule);
    let best_restart = out
        .restarts
        .iter()
        .position(|r| r.best_f == out.best_f)
        .unwrap_or(0);
    Ok(OptimizationResult {
        best_schedule,
        best_objective,
        evaluations_used: out.evaluations,
        restart_bests: out.restarts.iter().map(|r| r.best_f).collect(),
        converged: out.restarts[best_restart].converged,
    })
}

/// Minimizes the flat-band `ζ` (closed form) over `n ≤ 15` free times with
/// `Σtₙ ≤ t_limit`. The first restart starts from the best superiteration
/// schedule.
pub fn optimize_times(band: &BandModel, n: usize, t_limit: f64, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    if n > CLOSED_FORM_LIMIT {
        return Err(Error::EnumerationBound {
            what: "time optimization",
            max: CLOSED_FORM_LIMIT,
            got: n,
        });
    }
    let objective = |s: &TimeSchedule| closed_form::rsn_closed_form(band, s).unwrap_or(f64::INFINITY);
    let alpha = optimize_alpha(&objective, n, t_limit, cfg)?;
    let start = superiteration_schedule(&SuperiterationParams::new(alpha.alpha, n, t_limit)?)?;
    optimize_schedule(&objective, n, t_limit, Some(&start), cfg)
}

/// Best geometric ratio found by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub objective: f64,
    /// The objective did not vary over the bounds; `alpha` is their midpoint.
    pub flat: bool,
    pub evaluations: usize,
}

/// Minimizes `f(α)` over `(low, high]`: a grid of `α − low` log-spaced
/// from `1e-4·(high − low)` to `high − low`, then golden-section search in
/// `log(α − low)` between the neighbours of the best grid point down to a
/// relative `α` precision of `1e-6`. Ties within the tolerance go to the
/// smaller `α`.
pub fn scan_alpha(f: &(dyn Fn(f64) -> f64 + Sync), bounds: (f64, f64), cfg: &OptimizationConfig) -> AlphaOptimum {
    let (lo, hi) = bounds;
    if hi - lo <= 1e-12 * hi {
        return AlphaOptimum {
            alpha: hi,
            objective: f(hi),
            flat: false,
            evaluations: 1,
        };
    }
    let grid = log_offsets(lo, hi, cfg.alpha_grid_points, ALPHA_GRID_MIN_FRACTION);
    let values = parallel::map_collect(&grid, |&a| f(a));
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min <= cfg.tolerance * max.abs() {
        let mid = 0.5 * (lo + hi);
        return AlphaOptimum {
            alpha: mid,
            objective: f(mid),
            flat: true,
            evaluations: grid.len() + 1,
        };
    }
    let k = argmin_with_ties(&values, cfg.tolerance);
    let left = if k == 0 { lo + 1e-3 * (grid[0] - lo) } else { grid[k - 1] };
    let right = if k + 1 == grid.len() { hi } else { grid[k + 1] };
    let g = |s: f64| f(lo + s.exp());
    let refined = golden_section(g, (left - lo).ln(), (right - lo).ln(), |s| {
        let a = lo + s.exp();
        1e-6 * a / (a - lo)
    });
    let refined_alpha = lo + refined.x.exp();
    let evaluations = grid.len() + refined.evaluations;
    let cut = values[k] - cfg.tolerance * values[k].abs();
    if refined.value < cut || (refined.value <= values[k] && refined_alpha < grid[k]) {
        AlphaOptimum {
            alpha: refined_alpha,
            objective: refined.value,
            flat: false,
            evaluations,
        }
    } else {
        AlphaOptimum {
            alpha: grid[k],
            objective: values[k],
            flat: false,
            evaluations,
        }
    }
}

/// Best superiteration ratio for `objective` at `n` samples and total
/// time `t`, searched over `cfg.alpha_bounds`.
pub fn optimize_alpha(objective: &Objective<'_>, n: usize, t: f64, cfg: &OptimizationConfig) -> Result<AlphaOptimum> {
    cfg.validate()?;
    SuperiterationParams::new(cfg.alpha_bounds.1, n, t)?;
    let f = |alpha: f64| match SuperiterationParams::new(alpha, n, t).and_then(|p| superiteration_schedule(&p)) {
        Ok(s) => objective(&s),
        Err(_) => f64::INFINITY,
    };
    Ok(scan_alpha(&f, cfg.alpha_bounds, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub total_time: f64,
    pub alpha_opt: f64,
    pub objective: f64,
    pub flat: bool,
}

/// [`optimize_alpha`] at each total time of an ascending grid. The
/// objective receives the total time and the schedule. With `monotone`,
/// each search is capped above by the previous `α_opt`.
pub fn adaptive_alpha_curve(
    objective: &(dyn Fn(f64, &TimeSchedule) -> f64 + Sync),
    n: usize,
    t_grid: &[f64],
    monotone: bool,
    cfg: &OptimizationConfig,
) -> Result<Vec<CurvePoint>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return domain("total-time grid must be ascending");
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut cap = cfg.alpha_bounds.1;
    for &t in t_grid {
        let mut c = *cfg;
        c.alpha_bounds.1 = if monotone { cap } else { cfg.alpha_bounds.1 };
        let obj = |s: &TimeSchedule| objective(t, s);
        let best = optimize_alpha(&obj, n, t, &c)?;
        if monotone {
            cap = best.alpha.min(cap);
        }
        out.push(CurvePoint {
            total_time: t,
            alpha_opt: best.alpha,
            objective: best.objective,
            flat: best.flat,
        });
    }
    Ok(out)
}

/// Best width of half-Gaussian random schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RraOptimum {
    pub sigma: f64,
    pub n_cycles: usize,
    pub mean_objective: f64,
    pub std_error: f64,
    /// Objective of every shot at the optimum.
    pub shots: Vec<f64>,
    pub evaluations: usize,
}

const HALF_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4;

/// Cycles whose expected total time `cycles·σ·√(2/π)` is closest to `t`,
/// clamped to `1..=n`.
pub fn rra_cycles(sigma: f64, t: f64, n: usize) -> usize {
    let c = (t / (sigma * HALF_NORMAL_MEAN)).round();
    if c.is_finite() {
        (c as usize).clamp(1, n)
    } else {
        n
    }
}

/// Common random numbers for random-schedule studies: `shots` rows of `n`
/// standard half-normal deviates, row `k` from stream `k` of `seed`.
pub fn rra_deviates(n: usize, shots: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..shots)
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            (0..n).map(|_| half_normal(&mut rng)).collect()
        })
        .collect()
}

/// Per-shot objectives of random schedules `σ·z[k][..cycles]`.
pub fn rra_shots(objective: &Objective<'_>, deviates: &[Vec<f64>], sigma: f64, cycles: usize) -> Vec<f64> {
    parallel::map_collect(deviates, |z| {
        let times = z[..cycles.min(z.len())].iter().map(|v| sigma * v).collect();
        objective(&TimeSchedule::new(times).expect("half-normal draws are nonnegative"))
    })
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Minimizes the mean objective of random schedules over `σ`. Each `σ`
/// runs `rra_cycles(σ, t, n)` cycles so the expected total time is `t`;
/// `σ` is scanned log-spaced over `[t/(n·c), t/c]`, `c = √(2/π)`, and
/// refined by golden-section search. All `σ` share the same deviates.
pub fn optimize_rra_sigma(objective: &Objective<'_>, n: usize, t: f64, cfg: &OptimizationConfig) -> Result<RraOptimum> {
    cfg.validate()?;
    if n == 0 || !(t > 0.0 && t.is_finite()) {
        return domain("random schedules need n >= 1 and a positive total time");
    }
    let deviates = rra_deviates(n, cfg.shots, cfg.seed);
    let mean_at = |log_sigma: f64| -> f64 {
        let sigma = log_sigma.exp();
        let shots = rra_shots(objective, &deviates, sigma, rra_cycles(sigma, t, n));
        mean_and_error(&shots).0
    };
    let s_lo = (t / (n as f64 * HALF_NORMAL_MEAN)).ln();
    let s_hi = (t / HALF_NORMAL_MEAN).ln();
    let m = cfg.sigma_grid_points;
    let grid: Vec<f64> = (0..m)
        .map(|i| s_lo + (s_hi - s_lo) * i as f64 / (m - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&s| mean_at(s)).collect();
    let k = argmin_with_ties(&values, cfg.tolerance);
    let left = grid[k.saturating_sub(1)];
    let right = grid[(k + 1).min(m - 1)];
    let mut best = (grid[k], values[k]);
    let mut evaluations = m;
    if right > left {
        let r = golden_section(mean_at, left, right, |_| 1e-6);
        evaluations += r.evaluations;
        if r.value < values[k] - cfg.tolerance * values[k].abs() {
            best = (r.x, r.value);
        }
    }
    let sigma = best.0.exp();
    let n_cycles = rra_cycles(sigma, t, n);
    let shots = rra_shots(objective, &deviates, sigma, n_cycles);
    let (mean_objective, std_error) = mean_and_error(&shots);
    Ok(RraOptimum {
        sigma,
        n_cycles,
        mean_objective,
        std_error,
        shots,
        evaluations: evaluations * cfg.shots,
    })
}

/// `1 − F = ζ/(w + ζ)` for a fixed initial state.
pub fn infidelity_objective(spectrum: &OverlapSpectrum) -> impl Fn(&TimeSchedule) -> f64 + Sync + '_ {
    move |s| spectrum.evaluate(s).infidelity().unwrap_or(1.0)
}

/// Flat-band `ζ`: closed form up to 15 times, quadrature beyond.
pub fn band_objective(band: BandModel, quad: QuadConfig) -> impl Fn(&TimeSchedule) -> f64 + Sync {
    move |s| closed_form::band_rsn(&band, s, &quad).unwrap_or(f64::INFINITY)
}

/// Named spectral functions on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `∝ e^{−E²}`.
    Gaussian,
    /// `∝ 1`.
    Flat,
}

impl Preset {
    pub fn spectral_function(self) -> SpectralFunction {
        let density = match self {
            Preset::Gaussian => Density::Gaussian,
            Preset::Flat => Density::Constant,
        };
        SpectralFunction::ContinuousBand(Band {
            delta_min: 0.0,
            delta_max: 1.0,
            density,
            weight: 1.0,
        })
    }
}

/// Distance from `target` to the nearest non-target part of the spectrum.
pub fn spectral_gap(spec: &SpectralFunction, target: f64) -> Result<f64> {
    let gap = match spec {
        SpectralFunction::Discrete { energies, weights } => energies
            .iter()
            .zip(weights)
            .filter(|(e, w)| **w > 0.0 && !spectral::is_target_level(**e, target))
            .map(|(e, _)| (e - target).abs())
            .fold(f64::INFINITY, f64::min),
        SpectralFunction::ContinuousBand(b) => {
            if target < b.delta_min {
                b.delta_min - target
            } else if target > b.delta_max {
                target - b.delta_max
            } else {
                0.0
            }
        }
    };
    if !(gap > 0.0 && gap.is_finite()) {
        return domain("target energy has no gap to the rest of the spectrum");
    }
    Ok(gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFitParams {
    pub target: f64,
    pub total_time: f64,
    pub trotter_dt: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFit {
    pub alpha: f64,
    pub zeta: f64,
    pub flat: bool,
    /// Trotter-rounded schedule at `alpha`.
    pub schedule: TimeSchedule,
    /// Every quadrature met its tolerance.
    pub converged: bool,
}

/// Finds the ratio minimizing `ζ` of the Trotter-rounded superiteration
/// schedule on `spec`.
pub fn schedule_fit(
    spec: &SpectralFunction,
    params: &ScheduleFitParams,
    cfg: &OptimizationConfig,
    quad: &QuadConfig,
) -> Result<ScheduleFit> {
    let ScheduleFitParams {
        target,
        total_time,
        trotter_dt,
        n_samples,
    } = *params;
    if !(trotter_dt > 0.0) || trotter_dt >= total_time {
        return domain(format!(
            "Trotter step {trotter_dt} must be positive and below the total time {total_time}"
        ));
    }
    spec.validate()?;
    let failures = std::sync::atomic::AtomicUsize::new(0);
    let rounded = |alpha: f64| -> Result<TimeSchedule> {
        let s = superiteration_schedule(&SuperiterationParams::new(alpha, n_samples, total_time)?)?;
        trotter_round(&s, trotter_dt)
    };
    let zeta_of = |s: &TimeSchedule| match spectral::rsn_quadrature_with(spec, target, s, quad) {
        Ok(z) => z,
        Err(e) => {
            failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            e.estimate
        }
    };
    let objective = |s: &TimeSchedule| {
        let r = trotter_round(s, trotter_dt).expect("positive step");
        zeta_of(&r)
    };
    let best = optimize_alpha(&objective, n_samples, total_time, cfg)?;
    let schedule = rounded(best.alpha)?;
    let zeta = zeta_of(&schedule);
    Ok(ScheduleFit {
        alpha: best.alpha,
        zeta,
        flat: best.flat,
        schedule,
        converged: failures.into_inner() == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::rra_average_success;
    use crate::hamiltonians::{build_sector_hamiltonian, eigendecompose, make_initial_state, HamiltonianSpec, InitialStateKind};
    use std::f64::consts::PI;

    fn quick() -> OptimizationConfig {
        OptimizationConfig {
            budget: 6_000,
            ..Default::default()
        }
    }

    fn band() -> BandModel {
        BandModel::new(0.1, 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OptimizationConfig::default().validate().is_ok());
        let bad = OptimizationConfig {
            budget: 10,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizationConfig {
            alpha_bounds: (0.5, 2.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_level_is_suppressed_exactly() {
        let d = 0.4;
        let spec = SpectralFunction::discrete(vec![0.0, d], vec![0.5, 0.5]).unwrap();
        let obj = |s: &TimeSchedule| spectral::rsn_quadrature(&spec, 0.0, s).unwrap();
        let r = optimize_schedule(&obj, 1, PI / d, None, &quick()).unwrap();
        assert!((r.best_schedule.times()[0] - PI / d).abs() < 1e-6 * PI / d);
        assert!(r.best_objective < 1e-12);
    }

    #[test]
    fn optimize_times_is_feasible_and_reproducible() {
        let t = band().characteristic_time();
        let cfg = quick();
        let a = optimize_times(&band(), 6, t, &cfg).unwrap();
        let b = optimize_times(&band(), 6, t, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.best_schedule.total_time() <= t * (1.0 + 1e-12));
        let again = closed_form::rsn_closed_form(&band(), &a.best_schedule).unwrap();
        assert!((again - a.best_objective).abs() <= 1e-12 * a.best_objective);
        assert_eq!(a.restart_bests.len(), cfg.restarts);
        assert!(optimize_times(&band(), 16, t, &cfg).is_err());
    }

    #[test]
    fn alpha_restriction_never_beats_free_times() {
        let t = band().characteristic_time();
        let cfg = quick();
        let free = optimize_times(&band(), 6, t, &cfg).unwrap();
        let obj = |s: &TimeSchedule| closed_form::rsn_closed_form(&band(), s).unwrap();
        let geo = optimize_alpha(&obj, 6, t, &cfg).unwrap();
        assert!(free.best_objective <= geo.objective * (1.0 + 1e-9));
    }

    #[test]
    fn optimal_alpha_at_short_and_long_times() {
        let t0 = band().characteristic_time();
        let obj = band_objective(band(), QuadConfig::default());
        let cfg = OptimizationConfig::default();
        let short = optimize_alpha(&obj, 10, 0.5 * t0, &cfg).unwrap();
        assert!((short.alpha - 2.0).abs() < 0.05, "{short:?}");
        let long = optimize_alpha(&obj, 10, 10.0 * t0, &cfg).unwrap();
        assert!(long.alpha - 1.0 < 2.0 - long.alpha, "{long:?}");
    }

    #[test]
    fn alpha_plateau_is_broad() {
        let t0 = band().characteristic_time();
        let obj = band_objective(band(), QuadConfig::default());
        let cfg = OptimizationConfig::default();
        let best = optimize_alpha(&obj, 10, t0, &cfg).unwrap();
        for f in [0.98, 1.02] {
            let a = (best.alpha * f).clamp(1.0, 2.0);
            let s = superiteration_schedule(&SuperiterationParams::new(a, 10, t0).unwrap()).unwrap();
            assert!(obj(&s) <= 10.0 * best.objective);
        }
    }

    #[test]
    fn flat_objective_returns_midpoint() {
        let obj = |_: &TimeSchedule| 0.25;
        let r = optimize_alpha(&obj, 5, 3.0, &OptimizationConfig::default()).unwrap();
        assert!(r.flat);
        assert_eq!(r.alpha, 1.5);
    }

    #[test]
    fn curve_single_point_matches_optimize_alpha() {
        let obj = band_objective(band(), QuadConfig::default());
        let cfg = OptimizationConfig::default();
        let t = 20.0;
        let curve = adaptive_alpha_curve(&|_, s| obj(s), 8, &[t], true, &cfg).unwrap();
        let direct = optimize_alpha(&obj, 8, t, &cfg).unwrap();
        assert_eq!(curve[0].alpha_opt, direct.alpha);
        assert!(adaptive_alpha_curve(&|_, s| obj(s), 8, &[2.0, 1.0], true, &cfg).is_err());
    }

    #[test]
    fn rra_two_level_matches_formula() {
        let d = 1.0;
        let obj = |s: &TimeSchedule| spectral::suppression_factor(d, 0.0, s.times());
        let cfg = OptimizationConfig {
            shots: 20_000,
            sigma_grid_points: 8,
            ..Default::default()
        };
        let r = optimize_rra_sigma(&obj, 1, 3.0, &cfg).unwrap();
        assert!(r.sigma.is_finite() && r.sigma > 0.0);
        let exact = rra_average_success(d, r.sigma, 1).unwrap();
        assert!((r.mean_objective - exact).abs() < 4.0 * r.std_error, "{r:?} {exact}");
    }

    #[test]
    fn rra_tiny_sigma_gives_empty_schedule_objective() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(6, 1.0)).unwrap();
        let eig = eigendecompose(&ham.matrix).unwrap();
        let psi = make_initial_state(&ham, InitialStateKind::BasisIndex(1)).unwrap();
        let spectrum = eig.overlap_spectrum(&psi, eig.ground_energy()).unwrap();
        let obj = infidelity_objective(&spectrum);
        let dev = rra_deviates(10, 50, 4);
        let shots = rra_shots(&obj, &dev, 1e-12, 10);
        let empty = obj(&TimeSchedule::empty());
        assert!(shots.iter().all(|v| (v - empty).abs() < 1e-12));
    }

    #[test]
    fn schedule_fit_rejects_coarse_step() {
        let spec = Preset::Flat.spectral_function();
        let p = ScheduleFitParams {
            target: -1.0,
            total_time: 2.0,
            trotter_dt: 2.0,
            n_samples: 100,
        };
        assert!(schedule_fit(&spec, &p, &OptimizationConfig::default(), &QuadConfig::default()).is_err());
    }

    #[test]
    fn schedule_fit_runs_on_presets() {
        for preset in [Preset::Gaussian, Preset::Flat] {
            let spec = preset.spectral_function();
            assert!((spectral_gap(&spec, -1.0).unwrap() - 1.0).abs() < 1e-15);
            let p = ScheduleFitParams {
                target: -1.0,
                total_time: 3.0 * PI,
                trotter_dt: 0.01 * PI,
                n_samples: 100,
            };
            let fit = schedule_fit(&spec, &p, &OptimizationConfig::default(), &QuadConfig::default()).unwrap();
            assert!(fit.converged);
            assert!(fit.zeta > 0.0 && fit.zeta < 1.0);
            assert!(fit.schedule.times().iter().all(|t| (t / (0.01 * PI)).fract() < 1e-6 || (t / (0.01 * PI)).fract() > 1.0 - 1e-6));
        }
    }
}
