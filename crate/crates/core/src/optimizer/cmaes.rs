//! Covariance matrix adaptation evolution strategy with increasing
//! population restarts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::parallel;
use crate::schedules::{rng_stream, standard_normal};

/// Settings for [`minimize`].
#[derive(Debug, Clone)]
pub struct CmaSettings {
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Relative spread of recent best values that counts as converged.
    pub tolerance: f64,
}

/// Best point of one restart.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CmaOutcome {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// Start point and step size for a restart, chosen from the restart index
/// and that restart's generator.
pub type StartFn<'a> = dyn Fn(usize, &mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, f64) + Sync + 'a;

/// Minimizes `f`. Restart `r` uses generator stream `r` of `settings.seed`,
/// population `λ₀·2^r` and an equal share of the remaining budget.
pub fn minimize<F>(f: &F, start: &StartFn<'_>, settings: &CmaSettings) -> CmaOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let restarts = settings.restarts.max(1);
    let mut used = 0;
    let mut outcomes = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let share = (settings.budget - used) / (restarts - r);
        let mut rng = rng_stream(settings.seed, r as u64);
        let (x0, sigma0) = start(r, &mut rng);
        let out = run(f, x0, sigma0, 1 << r.min(10), share, settings.tolerance, &mut rng);
        used += out.evaluations;
        outcomes.push(out);
    }
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_f.total_cmp(&b.1.best_f).then(a.0.cmp(&b.0)))
        .map(|(_, o)| o.clone())
        .expect("at least one restart");
    CmaOutcome {
        best_x: best.best_x,
        best_f: best.best_f,
        evaluations: used,
        restarts: outcomes,
    }
}

fn run<F>(
    f: &F,
    x0: Vec<f64>,
    sigma0: f64,
    pop_factor: usize,
    budget: usize,
    tolerance: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> RestartOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let nf = n as f64;
    let lambda = (4 + (3.0 * nf.ln()).floor() as usize) * pop_factor;
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let ds = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
    let history_len = 10 + (30.0 * nf / lambda as f64).ceil() as usize;

    let mut mean = DVector::from_vec(x0);
    let mut sigma = sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut pc = DVector::<f64>::zeros(n);
    let mut best_x = mean.as_slice().to_vec();
    let mut best_f = f(&best_x);
    let mut evaluations = 1;
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut generation = 0;

    while evaluations + lambda <= budget {
        let eig = SymmetricEigen::new(cov.clone());
        let d: DVector<f64> = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        let b = eig.eigenvectors;
        if d.max() / d.min() > 1e7 {
            break;
        }

        let zs: Vec<DVector<f64>> = (0..lambda)
            .map(|_| DVector::from_fn(n, |_, _| standard_normal(rng)))
            .collect();
        let ys: Vec<DVector<f64>> = zs.iter().map(|z| &b * z.component_mul(&d)).collect();
        let xs: Vec<Vec<f64>> = ys
            .iter()
            .map(|y| (&mean + y * sigma).as_slice().to_vec())
            .collect();
        let fs = parallel::map_collect(&xs, |x| f(x));
        evaluations += lambda;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&i, &j| fs[i].total_cmp(&fs[j]).then(i.cmp(&j)));
        if fs[order[0]] < best_f {
            best_f = fs[order[0]];
            best_x = xs[order[0]].clone();
        }

        let mut yw = DVector::<f64>::zeros(n);
        for (k, &i) in order.iter().take(mu).enumerate() {
            yw += &ys[i] * weights[k];
        }
        mean += &yw * sigma;

        // C^{-1/2} y_w = B D⁻¹ Bᵀ y_w
        let inv_sqrt_yw = &b * (b.tr_mul(&yw).component_div(&d));
        ps = &ps * (1.0 - cs) + inv_sqrt_yw * (cs * (2.0 - cs) * mueff).sqrt();
        generation += 1;
        let ps_norm = ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * generation)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &yw * (hsig_f * (cc * (2.0 - cc) * mueff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (k, &i) in order.iter().take(mu).enumerate() {
            rank_mu += &ys[i] * ys[i].transpose() * weights[k];
        }
        cov = &cov * (1.0 - c1 - cmu)
            + (&pc * pc.transpose() + &cov * ((1.0 - hsig_f) * cc * (2.0 - cc))) * c1
            + rank_mu * cmu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((cs / ds) * (ps_norm / chi_n - 1.0)).exp();

        history.push(fs[order[0]]);
        if history.len() > history_len {
            history.remove(0);
        }
        if history.len() == history_len {
            let hi = history
                .iter()
                .chain(std::iter::once(&fs[order[lambda - 1]]))
                .fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let lo = history.iter().fold(f64::INFINITY, |a, &v| a.min(v));
            if hi - lo <= tolerance * lo.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        let spread = sigma * cov.diagonal().map(|v| v.sqrt()).max();
        if spread <= 1e-12 * mean.amax().max(1e-300) {
            converged = true;
            break;
        }
        if !sigma.is_finite() {
            break;
        }
    }

    RestartOutcome {
        best_x,
        best_f,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(seed: u64) -> CmaSettings {
        CmaSettings {
            budget: 20_000,
            restarts: 2,
            seed,
            tolerance: 1e-12,
        }
    }

    #[test]
    fn minimizes_shifted_ellipsoid() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| 10f64.powi(i as i32) * (v - 1.0).powi(2))
                .sum::<f64>()
        };
        let start = |_r: usize, _rng: &mut rand_chacha::ChaCha8Rng| (vec![0.0; 5], 0.5);
        let out = minimize(&f, &start, &settings(3));
        assert!(out.best_f < 1e-10, "{}", out.best_f);
        assert!(out.restarts.iter().any(|r| r.converged));
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum::<f64>()
        };
        let start = |_r: usize, _rng: &mut rand_chacha::ChaCha8Rng| (vec![-1.0; 4], 0.5);
        let out = minimize(&f, &start, &settings(1));
        assert!(out.best_f < 1e-8, "{}", out.best_f);
    }

    #[test]
    fn is_reproducible() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin().powi(2) + 0.01 * v * v).sum::<f64>();
        let start = |_r: usize, _rng: &mut rand_chacha::ChaCha8Rng| (vec![2.0; 3], 1.0);
        let a = minimize(&f, &start, &settings(9));
        let b = minimize(&f, &start, &settings(9));
        assert_eq!(a.best_x, b.best_x);
        assert_eq!(a.evaluations, b.evaluations);
    }
}
