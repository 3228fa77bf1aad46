//! Long-time behaviour of geometric schedules.
//!
//! The suppression a geometric schedule applies to one level is the cosine
//! product `C(α, θ, N) = ∏ₙ cos²[(α − 1)θ/αⁿ]`, with `θ = (E − E_t)·t/2`
//! and `t` the schedule's base time (`t₁ = (α − 1)t`). As `N → ∞` it is the
//! squared Fourier transform of the Bernoulli convolution with parameter
//! `1/α`, evaluated at `(α − 1)θ`. For `α = 2` it reduces to
//! `(sin θ / θ)²`; for Pisot `α` it does not decay at all.

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::parallel;
use crate::schedules::{half_normal, rng_stream};
use crate::{domain, Error, Result};

/// Largest `N` accepted by [`fourier_expansion`].
pub const MAX_FOURIER_TERMS: usize = 24;

/// Infinite products stop once the next factor's argument drops below this.
pub const TRUNCATION_ARGUMENT: f64 = 1e-10;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;
/// Real root of `x³ = x + 1`.
pub const PLASTIC_NUMBER: f64 = 1.324_717_957_244_746;

/// Pisot numbers in `(1, 2]` used for demonstrations.
pub const KNOWN_PISOT: [f64; 3] = [PLASTIC_NUMBER, GOLDEN_RATIO, 2.0];

pub fn is_known_pisot(alpha: f64) -> bool {
    KNOWN_PISOT.iter().any(|p| (alpha - p).abs() < 1e-9)
}

/// Arguments of `C(α, θ, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductQuery {
    pub alpha: f64,
    pub theta: f64,
    pub n_terms: usize,
}

impl ProductQuery {
    pub fn new(alpha: f64, theta: f64, n_terms: usize) -> Result<Self> {
        let q = Self {
            alpha,
            theta,
            n_terms,
        };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return domain(format!("product function needs alpha > 1, got {}", self.alpha));
        }
        if !self.theta.is_finite() {
            return domain("theta must be finite");
        }
        Ok(())
    }
}

// ∏ₙ cos²(excess·θ / (1 + excess)ⁿ), with α − 1 passed directly so that
// α = 1 + b/θ keeps full precision.
fn product_with_excess(excess: f64, theta: f64, n_terms: usize) -> f64 {
    let log_alpha = excess.ln_1p();
    let amplitude = excess * theta;
    let mut acc = 1.0;
    for n in 1..=n_terms {
        let c = (amplitude * (-(n as f64) * log_alpha).exp()).cos();
        acc *= c * c;
    }
    acc
}

/// `C(α, θ, N) = ∏_{n=1}^{N} cos²[(α − 1)θ/αⁿ]`.
pub fn product_function(q: &ProductQuery) -> Result<f64> {
    q.validate()?;
    Ok(product_with_excess(q.alpha - 1.0, q.theta, q.n_terms))
}

/// Number of factors after which the remaining ones are 1 to within
/// `1e-20`, capped at `n_limit`.
pub fn truncation_terms(alpha: f64, theta: f64, n_limit: usize) -> usize {
    let amplitude = ((alpha - 1.0) * theta).abs();
    if amplitude <= TRUNCATION_ARGUMENT {
        return 0;
    }
    let needed = ((amplitude / TRUNCATION_ARGUMENT).ln() / alpha.ln()).ceil() as usize;
    needed.min(n_limit)
}

/// `C(α, θ) = lim_{N→∞} C(α, θ, N)`, truncated as in [`truncation_terms`].
pub fn product_function_limit(alpha: f64, theta: f64, n_limit: usize) -> Result<f64> {
    let n = truncation_terms(alpha, theta, n_limit);
    product_function(&ProductQuery::new(alpha, theta, n)?)
}

/// `C(α, θ, N)` through the Bernoulli-convolution expansion
///
/// `C = [2^{−N} Σ_{ε∈{±1}^N} cos(Σₙ εₙ (α − 1)θ α^{−n})]²`,
///
/// enumerating all `2^N` sign patterns.
pub fn fourier_expansion(q: &ProductQuery) -> Result<f64> {
    q.validate()?;
    let n = q.n_terms;
    if n > MAX_FOURIER_TERMS {
        return Err(Error::EnumerationBound {
            what: "Fourier expansion",
            max: MAX_FOURIER_TERMS,
            got: n,
        });
    }
    let log_alpha = (q.alpha - 1.0).ln_1p();
    let amplitude = (q.alpha - 1.0) * q.theta;
    let freqs: Vec<f64> = (1..=n)
        .map(|k| amplitude * (-(k as f64) * log_alpha).exp())
        .collect();

    let lo_bits = n.min(12);
    let (lo, hi) = freqs.split_at(lo_bits);
    let phase_table = |f: &[f64]| -> Vec<f64> {
        (0..1usize << f.len())
            .map(|mask| {
                f.iter()
                    .enumerate()
                    .map(|(i, &a)| if mask >> i & 1 == 1 { a } else { -a })
                    .sum()
            })
            .collect()
    };
    let lo_phases = phase_table(lo);
    let hi_phases = phase_table(hi);
    let total = parallel::sum_range(hi_phases.len(), |h| {
        let base = hi_phases[h];
        let mut acc = CompensatedSum::new();
        for &p in &lo_phases {
            acc.add((base + p).cos());
        }
        acc.value()
    });
    let mean = total / (1u64 << n) as f64;
    Ok(mean * mean)
}

/// Leading-order value `exp(2N log cos b)` of `C(1 + b/θ, θ, N)` for
/// `θ → ∞`.
pub fn exp_regime_value(b: f64, theta: f64, n: usize) -> Result<f64> {
    check_b(b, theta)?;
    Ok((2.0 * n as f64 * b.cos().ln()).exp())
}

/// Exact `C(1 + b/θ, θ, N)` for comparison with [`exp_regime_value`].
pub fn exp_regime_exact(b: f64, theta: f64, n: usize) -> Result<f64> {
    check_b(b, theta)?;
    Ok(product_with_excess(b / theta, theta, n))
}

fn check_b(b: f64, theta: f64) -> Result<()> {
    if !(b > 0.0 && b < std::f64::consts::FRAC_PI_2) {
        return domain(format!("exponential regime needs 0 < b < π/2, got {b}"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("theta must be positive, got {theta}"));
    }
    Ok(())
}

/// Power-law fit of the upper envelope of `C(α, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitResult {
    pub alpha: f64,
    /// Fitted exponent in `C ~ θ^{−γ}`.
    pub gamma: f64,
    pub theta_range: (f64, f64),
    /// RMS residual of the fit in natural-log space.
    pub residual: f64,
    /// Set for known Pisot ratios, or when the envelope does not decay.
    pub non_decaying: bool,
    /// `(θ_k, max C)` per window.
    pub envelope: Vec<(f64, f64)>,
}

impl DecayFitResult {
    /// Envelope value of the last window.
    pub fn final_envelope(&self) -> f64 {
        self.envelope.last().map(|e| e.1).unwrap_or(0.0)
    }
}

/// Number of log-spaced envelope windows.
pub const ENVELOPE_WINDOWS: usize = 50;

const MIN_ENVELOPE_POINTS: usize = 20;
const NON_DECAY_GAMMA: f64 = 0.1;

/// Upper envelope of `C(α, θ)` for `θ ∈ [θ_max/100, θ_max]`.
///
/// Window `k` starts at the `k`-th of [`ENVELOPE_WINDOWS`] log-spaced
/// points and spans a factor `max(α, spacing)`, long enough to contain one
/// self-similar period of the product. Its envelope value is the maximum of
/// `C` over a grid fine enough to resolve the fastest factor.
pub fn decay_envelope(alpha: f64, theta_max: f64, n_limit: usize) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return domain(format!("decay fit needs alpha > 1, got {alpha}"));
    }
    if !(theta_max >= 1e3 && theta_max.is_finite()) {
        return domain(format!("decay fit needs theta_max >= 1e3, got {theta_max}"));
    }
    let theta_min = theta_max / 100.0;
    let spacing = (theta_max / theta_min).powf(1.0 / ENVELOPE_WINDOWS as f64);
    let span = alpha.max(spacing);
    // Fastest factor cos²((α−1)θ/α) has angular frequency 2(α−1)/α in θ.
    let step = std::f64::consts::PI / 32.0 * alpha / (alpha - 1.0);
    Ok(parallel::map_range(ENVELOPE_WINDOWS, |k| {
        let start = theta_min * spacing.powi(k as i32);
        let end = start * span;
        let points = ((end - start) / step).ceil().max(1.0) as usize;
        let n_terms = truncation_terms(alpha, end, n_limit);
        let mut best = 0.0f64;
        for i in 0..=points {
            let theta = start + (end - start) * i as f64 / points as f64;
            best = best.max(product_with_excess(alpha - 1.0, theta, n_terms));
        }
        (start, best)
    }))
}

/// Fits `γ` in `C(α, θ) = O(θ^{−γ})` to the upper envelope from
/// [`decay_envelope`] by least squares in log-log space.
pub fn fit_decay_exponent(alpha: f64, theta_max: f64, n_limit: usize) -> Result<DecayFitResult> {
    let envelope = decay_envelope(alpha, theta_max, n_limit)?;
    let pts: Vec<(f64, f64)> = envelope
        .iter()
        .filter(|(_, c)| *c > 0.0 && c.is_finite())
        .map(|(t, c)| (t.ln(), c.ln()))
        .collect();
    if pts.len() < MIN_ENVELOPE_POINTS {
        return Err(Error::Fit(format!(
            "only {} usable envelope points, need {MIN_ENVELOPE_POINTS}",
            pts.len()
        )));
    }
    let (slope, intercept) = least_squares(&pts);
    let residual = (pts
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    let gamma = -slope;
    let pisot = is_known_pisot(alpha) && alpha.fract() != 0.0;
    Ok(DecayFitResult {
        alpha,
        gamma,
        theta_range: (theta_max / 100.0, theta_max),
        residual,
        non_decaying: pisot || gamma < NON_DECAY_GAMMA,
        envelope,
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Mean per-cycle success of a half-Gaussian random schedule raised to
/// `n_cycles`: `[(1 + e^{−ΔE²σ²/2})/2]^{n_cycles}`.
pub fn rra_average_success(delta_e: f64, sigma: f64, n_cycles: u32) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if n_cycles == 0 {
        return domain("n_cycles must be at least 1");
    }
    let single = 0.5 * (1.0 + (-0.5 * delta_e * delta_e * sigma * sigma).exp());
    Ok(single.powi(n_cycles as i32))
}

/// The same average written for a mean total time `T = Nσ√(2/π)`.
pub fn rra_average_success_at_total_time(delta_e: f64, sigma: f64, total_time: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let single = 0.5 * (1.0 + (-0.5 * delta_e * delta_e * sigma * sigma).exp());
    Ok((total_time / sigma * std::f64::consts::FRAC_PI_2.sqrt() * single.ln()).exp())
}

/// Monte Carlo estimate of the one-cycle mean success `E[cos²(ΔE·t/2)]`
/// with `t` half-Gaussian of scale `sigma`; returns `(mean, standard error)`.
pub fn rra_success_monte_carlo(delta_e: f64, sigma: f64, samples: usize, seed: u64) -> (f64, f64) {
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let parts = parallel::map_range(chunks, |c| {
        let mut rng = rng_stream(seed, c as u64);
        let count = CHUNK.min(samples - c * CHUNK);
        let mut sum = CompensatedSum::new();
        let mut sq = CompensatedSum::new();
        for _ in 0..count {
            let t = sigma * half_normal(&mut rng);
            let p = (0.5 * delta_e * t).cos().powi(2);
            sum.add(p);
            sq.add(p * p);
        }
        (sum.value(), sq.value())
    });
    let n = samples as f64;
    let mean = parts.iter().map(|p| p.0).sum::<f64>() / n;
    let second = parts.iter().map(|p| p.1).sum::<f64>() / n;
    let var = (second - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn q(alpha: f64, theta: f64, n: usize) -> ProductQuery {
        ProductQuery::new(alpha, theta, n).unwrap()
    }

    #[test]
    fn alpha_two_sinc_identity() {
        assert!(product_function(&q(2.0, PI, 30)).unwrap().abs() < 1e-12);
        for i in 0..500 {
            let theta = 0.1 + i as f64 * 0.2;
            let s = (theta.sin() / theta).powi(2);
            assert!((product_function(&q(2.0, theta, 40)).unwrap() - s).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_zero_gives_one() {
        for alpha in [1.05, 1.8, 2.0, 3.3] {
            assert_eq!(product_function(&q(alpha, 0.0, 17)).unwrap(), 1.0);
        }
        assert_relative_eq!(fourier_expansion(&q(2.0, 0.0, 5)).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn fourier_matches_product_examples() {
        for (a, t, n) in [(1.8, 7.3, 12), (2.0, PI / 2.0, 20), (GOLDEN_RATIO, 100.0, 20)] {
            let p = product_function(&q(a, t, n)).unwrap();
            let f = fourier_expansion(&q(a, t, n)).unwrap();
            assert!((p - f).abs() < 1e-12, "{a} {t} {n}: {p} vs {f}");
        }
        assert!(fourier_expansion(&q(2.0, 1.0, 25)).is_err());
    }

    #[test]
    fn rejects_alpha_at_most_one() {
        assert!(ProductQuery::new(1.0, 1.0, 3).is_err());
        assert!(ProductQuery::new(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn exponential_regime() {
        let exact = exp_regime_exact(0.5, 1e6, 10).unwrap();
        let lead = exp_regime_value(0.5, 1e6, 10).unwrap();
        assert_relative_eq!(exact, lead, max_relative = 1e-4);
        let doubled = exp_regime_value(0.5, 1e6, 20).unwrap();
        assert_relative_eq!(doubled, lead * lead, max_relative = 1e-12);
        assert_relative_eq!(exp_regime_value(1e-9, 1e3, 40).unwrap(), 1.0, max_relative = 1e-15);
        assert!(exp_regime_value(PI / 2.0, 1e3, 4).is_err());
        assert!(exp_regime_value(0.0, 1e3, 4).is_err());
    }

    #[test]
    fn truncation_rule() {
        let n = truncation_terms(2.0, 1e4, 1000);
        assert!(1e4 / 2f64.powi(n as i32) < TRUNCATION_ARGUMENT);
        assert!(1e4 / 2f64.powi(n as i32 - 1) >= TRUNCATION_ARGUMENT);
        assert_eq!(truncation_terms(2.0, 1e4, 10), 10);
    }

    #[test]
    fn decay_fit_alpha_two() {
        let fit = fit_decay_exponent(2.0, 1e4, 200).unwrap();
        assert!((fit.gamma - 2.0).abs() < 0.1, "{fit:?}");
        assert!(!fit.non_decaying);
    }

    #[test]
    fn decay_fit_golden_ratio_is_flagged() {
        let fit = fit_decay_exponent(GOLDEN_RATIO, 1e4, 200).unwrap();
        assert!(fit.non_decaying);
        // Peaks recur at θ ≈ π·φ^k with a fixed height.
        assert!(fit.final_envelope() > 1e-5, "{}", fit.final_envelope());
    }

    #[test]
    fn decay_fit_needs_range() {
        assert!(fit_decay_exponent(2.0, 500.0, 100).is_err());
        assert!(fit_decay_exponent(1.0, 1e4, 100).is_err());
    }

    #[test]
    fn rra_formula_examples() {
        assert_eq!(rra_average_success(0.0, 2.0, 7).unwrap(), 1.0);
        assert_relative_eq!(
            rra_average_success(1.0, 1.0, 1).unwrap(),
            0.803_265_329_856_316_7,
            max_relative = 1e-12
        );
        assert_relative_eq!(rra_average_success(1e3, 1e3, 5).unwrap(), 2f64.powi(-5), max_relative = 1e-12);
        let n = 10u32;
        let sigma = 0.7;
        let t = n as f64 * sigma * (2.0 / PI).sqrt();
        assert_relative_eq!(
            rra_average_success_at_total_time(1.3, sigma, t).unwrap(),
            rra_average_success(1.3, sigma, n).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rra_monte_carlo_agrees() {
        let (mean, se) = rra_success_monte_carlo(1.0, 1.0, 200_000, 11);
        let exact = rra_average_success(1.0, 1.0, 1).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} {se}");
    }

    proptest! {
        #[test]
        fn product_is_in_unit_interval(alpha in 1.001f64..4.0, theta in -1e3f64..1e3, n in 0usize..60) {
            let c = product_function(&q(alpha, theta, n)).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
