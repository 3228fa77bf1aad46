//! Schedule generators: geometric series ("generalized superiterations"),
//! half-Gaussian random draws and Trotter rounding.
//!
//! Random schedules use [`ChaCha8Rng`]. A stream is identified by a 64-bit
//! seed and a 64-bit stream index: `ChaCha8Rng::seed_from_u64(seed)`
//! followed by `set_stream(index)`. Independent shots, restarts and sweep
//! points each take their own stream index, so results do not depend on
//! evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::numeric;
use crate::spectral::TimeSchedule;
use crate::{domain, Result};

/// Deterministic generator for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Geometric schedule with ratio `1/alpha`, `n_samples` entries and total
/// time `total_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperiterationParams {
    pub alpha: f64,
    pub n_samples: usize,
    pub total_time: f64,
}

impl SuperiterationParams {
    pub fn new(alpha: f64, n_samples: usize, total_time: f64) -> Result<Self> {
        let p = Self {
            alpha,
            n_samples,
            total_time,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return domain(format!("alpha must be >= 1, got {}", self.alpha));
        }
        if self.n_samples == 0 {
            return domain("n_samples must be positive");
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return domain(format!("total time must be positive, got {}", self.total_time));
        }
        Ok(())
    }
}

/// `tₙ = t₁·α^{−(n−1)}` with `t₁ = T(1 − α⁻¹)/(1 − α^{−N})`, longest
/// first. `α = 1` gives the uniform schedule `T/N`.
pub fn superiteration_schedule(params: &SuperiterationParams) -> Result<TimeSchedule> {
    params.validate()?;
    let SuperiterationParams {
        alpha,
        n_samples: n,
        total_time: total,
    } = *params;
    if alpha == 1.0 {
        return TimeSchedule::new(vec![total / n as f64; n]);
    }
    let log_alpha = (alpha - 1.0).ln_1p();
    // (1 − α⁻¹)/(1 − α^{−N}) without cancellation near α = 1.
    let first = total * (-(-log_alpha).exp_m1()) / (-(-(n as f64) * log_alpha).exp_m1());
    let mut times: Vec<f64> = (0..n).map(|k| first * (-(k as f64) * log_alpha).exp()).collect();
    let sum = numeric::compensated_sum(times.iter().copied());
    let fix = total / sum;
    for t in &mut times {
        *t *= fix;
    }
    TimeSchedule::new(times)
}

/// Half-Gaussian random schedule: `|X|` with `X ~ N(0, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianScheduleParams {
    pub sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

// 53-bit uniform strictly inside (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Standard half-normal deviate by inverse CDF, one uniform per draw.
pub fn half_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * open_unit(rng))
}

/// Standard normal deviate by inverse CDF, one uniform per draw.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Normal::standard().inverse_cdf(open_unit(rng))
}

/// Draws `params.n_samples` times from stream 0 of `params.seed`.
pub fn gaussian_random_schedule(params: &GaussianScheduleParams) -> Result<TimeSchedule> {
    let mut rng = rng_stream(params.seed, 0);
    gaussian_random_schedule_from(params.sigma, params.n_samples, &mut rng)
}

/// Draws a half-Gaussian schedule from a caller-owned generator.
pub fn gaussian_random_schedule_from<R: Rng + ?Sized>(
    sigma: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<TimeSchedule> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be nonnegative, got {sigma}"));
    }
    let times = (0..n_samples).map(|_| sigma * half_normal(rng)).collect();
    TimeSchedule::new(times)
}

/// Rounds every entry down to a multiple of `dt`, dropping zeros.
pub fn trotter_round(sched: &TimeSchedule, dt: f64) -> Result<TimeSchedule> {
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("Trotter step must be positive, got {dt}"));
    }
    let times = sched
        .times()
        .iter()
        .map(|&t| {
            // Tolerate representation error so exact multiples stay put.
            let steps = (t / dt * (1.0 + 1e-12)).floor();
            dt * steps
        })
        .filter(|&t| t > 0.0)
        .collect();
    TimeSchedule::new(times)
}
