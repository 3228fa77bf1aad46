//! Exact residual spectral norm for a flat band.
//!
//! For a constant density on `[Δmin, Δmax]` with the target at zero,
//! expanding `∏ₙ |1 + e^{-iEtₙ}|²` gives a finite sum of sinc terms over
//! sign configurations. Each pair of signs `(kₙ, kₙ′)` only enters through
//! `sₙ = (kₙ + kₙ′)/2 ∈ {−1, 0, 1}` with multiplicities `{1, 2, 1}`, so the
//! sum has `3^N` terms rather than `4^N`.

use serde::{Deserialize, Serialize};

use crate::numeric::{self, CompensatedSum, QuadConfig};
use crate::parallel;
use crate::spectral::{self, Band, SpectralFunction, TimeSchedule};
use crate::{domain, Error, Result};

/// Largest number of nonzero times the enumeration accepts.
pub const MAX_ENUMERATION: usize = 22;

/// Above this many nonzero times [`band_rsn`] integrates numerically.
pub const CLOSED_FORM_LIMIT: usize = 15;

// Entries enumerated into the shared inner table; the rest are split
// across parallel tasks.
const INNER_LEVELS: usize = 6;

/// Flat band `[delta_min, delta_max]` with the target at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandModel {
    pub delta_min: f64,
    pub delta_max: f64,
}

impl BandModel {
    pub fn new(delta_min: f64, delta_max: f64) -> Result<Self> {
        if !(delta_min > 0.0 && delta_max > delta_min && delta_max.is_finite()) {
            return domain(format!(
                "band model needs 0 < delta_min < delta_max, got [{delta_min}, {delta_max}]"
            ));
        }
        Ok(Self {
            delta_min,
            delta_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.delta_max - self.delta_min
    }

    pub fn characteristic_time(&self) -> f64 {
        std::f64::consts::PI / self.delta_min
    }

    pub fn spectral_function(&self) -> SpectralFunction {
        SpectralFunction::ContinuousBand(Band {
            delta_min: self.delta_min,
            delta_max: self.delta_max,
            density: spectral::Density::Constant,
            weight: 1.0,
        })
    }
}

fn nonzero_times(sched: &TimeSchedule, what: &'static str) -> Result<Vec<f64>> {
    let times: Vec<f64> = sched.times().iter().copied().filter(|&t| t > 0.0).collect();
    if times.len() > MAX_ENUMERATION {
        return Err(Error::EnumerationBound {
            what,
            max: MAX_ENUMERATION,
            got: times.len(),
        });
    }
    Ok(times)
}

/// `Σ_s w_s Σ_i cᵢ·sin(aᵢ x_s)/x_s` with `x_s = Σₙ sₙ tₙ` and normalized
/// multiplicities `w_s = ∏ₙ {¼, ½, ¼}`. Terms at `x = 0` take their limit
/// `cᵢ·aᵢ`.
fn weighted_sine_sum(times: &[f64], components: &[(f64, f64)]) -> f64 {
    let at_zero = |x: f64| -> f64 {
        components
            .iter()
            .map(|&(a, c)| c * a * numeric::sinc(a * x))
            .sum()
    };
    let Some((&first, rest)) = times.split_first() else {
        return at_zero(0.0);
    };

    // Only even integrands: sign configurations with s₁ = −1 mirror those
    // with s₁ = +1, so Σ = ½ Σ_rest w [f(x) + f(x + t₁)].
    let inner_len = rest.len().min(INNER_LEVELS);
    let (outer, inner) = rest.split_at(rest.len() - inner_len);
    let table = InnerTable::build(inner, components);

    let tasks = 3usize.pow(outer.len() as u32);
    let total = parallel::sum_range(tasks, |code| {
        let mut prefix = 0.0;
        let mut weight = 1.0;
        let mut c = code;
        for &t in outer {
            match c % 3 {
                0 => {
                    prefix -= t;
                    weight *= 0.25;
                }
                1 => weight *= 0.5,
                _ => {
                    prefix += t;
                    weight *= 0.25;
                }
            }
            c /= 3;
        }
        let mut acc = CompensatedSum::new();
        for shift in [prefix, prefix + first] {
            acc.add(table.shifted_sum(shift, components, &at_zero));
        }
        weight * acc.value()
    });
    0.5 * total
}

struct InnerTable {
    x: Vec<f64>,
    w: Vec<f64>,
    // (sin, cos) of aᵢ·x for each component, component-major.
    rot: Vec<Vec<(f64, f64)>>,
}

impl InnerTable {
    fn build(times: &[f64], components: &[(f64, f64)]) -> Self {
        let size = 3usize.pow(times.len() as u32);
        let mut x = Vec::with_capacity(size);
        let mut w = Vec::with_capacity(size);
        let mut rot: Vec<Vec<(f64, f64)>> = components.iter().map(|_| Vec::with_capacity(size)).collect();
        x.push(0.0);
        w.push(1.0);
        for r in rot.iter_mut() {
            r.push((0.0, 1.0));
        }
        for &t in times {
            let len = x.len();
            let steps: Vec<(f64, f64)> = components.iter().map(|&(a, _)| (a * t).sin_cos()).collect();
            for j in 0..len {
                let (xj, wj) = (x[j], w[j]);
                x[j] = xj - t;
                w[j] = 0.25 * wj;
                x.push(xj);
                w.push(0.5 * wj);
                x.push(xj + t);
                w.push(0.25 * wj);
                for (r, &(st, ct)) in rot.iter_mut().zip(&steps) {
                    let (s, c) = r[j];
                    // e^{ia(x−t)}, e^{iax}, e^{ia(x+t)}
                    r[j] = (s * ct - c * st, c * ct + s * st);
                    r.push((s, c));
                    r.push((s * ct + c * st, c * ct - s * st));
                }
            }
        }
        Self { x, w, rot }
    }

    fn shifted_sum(&self, shift: f64, components: &[(f64, f64)], at_zero: &dyn Fn(f64) -> f64) -> f64 {
        let shift_rot: Vec<(f64, f64)> = components.iter().map(|&(a, _)| (a * shift).sin_cos()).collect();
        let amax = components.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
        let small = 1e-3 / amax.max(1e-300);
        let mut acc = CompensatedSum::new();
        for j in 0..self.x.len() {
            let x = shift + self.x[j];
            let term = if x.abs() < small {
                at_zero(x)
            } else {
                let mut num = 0.0;
                for (i, &(_, c)) in components.iter().enumerate() {
                    let (sj, cj) = self.rot[i][j];
                    let (ss, cs) = shift_rot[i];
                    num += c * (ss * cj + cs * sj);
                }
                num / x
            };
            acc.add(self.w[j] * term);
        }
        acc.value()
    }
}

/// `I(Δ) = ∫_{−Δ}^{Δ} ∏ₙ |1 + e^{−iEtₙ}|² dE`, evaluated as the
/// multiplicity-weighted sinc sum `2Δ Σ_s w_s sinc(Δ Σₙ sₙtₙ)`.
pub fn sinc_sum_i(delta: f64, sched: &TimeSchedule) -> Result<f64> {
    let times = nonzero_times(sched, "sinc sum")?;
    let normalized = weighted_sine_sum(&times, &[(delta, 2.0)]);
    // Zero entries contribute a factor of 4 each as well.
    Ok(normalized * 4f64.powi(sched.len() as i32))
}

/// Exact `ζ` of a flat band:
/// `(Δmax − Δmin)⁻¹ 4^{−N} · ½ (I(Δmax) − I(Δmin))`.
pub fn rsn_closed_form(band: &BandModel, sched: &TimeSchedule) -> Result<f64> {
    let times = nonzero_times(sched, "closed-form residual norm")?;
    let sum = weighted_sine_sum(&times, &[(band.delta_max, 1.0), (band.delta_min, -1.0)]);
    Ok(sum / band.width())
}

/// Residual norm of a unit, unnormalized density on both sides of the
/// target: `∫_{Δmin ≤ |E| ≤ Δmax} ∏ₙ cos²(E tₙ/2) dE = 4^{−N}[I(Δmax) − I(Δmin)]`.
/// Equals `2(Δmax − Δmin)` times [`rsn_closed_form`].
pub fn rsn_unit_density(band: &BandModel, sched: &TimeSchedule) -> Result<f64> {
    Ok(unit_density_scale(band) * rsn_closed_form(band, sched)?)
}

/// Factor `2(Δmax − Δmin)` taking the normalized `ζ` to [`rsn_unit_density`].
pub fn unit_density_scale(band: &BandModel) -> f64 {
    2.0 * band.width()
}

/// `ζ` of a flat band: closed form up to [`CLOSED_FORM_LIMIT`] nonzero
/// times, adaptive quadrature beyond.
pub fn band_rsn(band: &BandModel, sched: &TimeSchedule, cfg: &QuadConfig) -> Result<f64> {
    let n = sched.times().iter().filter(|&&t| t > 0.0).count();
    if n <= CLOSED_FORM_LIMIT {
        rsn_closed_form(band, sched)
    } else {
        Ok(spectral::rsn_quadrature_with(&band.spectral_function(), 0.0, sched, cfg)?)
    }
}

/// `ζ` of the α = 2 superiteration in the limit of infinitely many
/// halvings: `(Δmax − Δmin)⁻¹ ∫ sinc²(E t₁) dE`.
pub fn superiteration_limit_rsn(band: &BandModel, t1: f64) -> Result<f64> {
    if !(t1 >= 0.0 && t1.is_finite()) {
        return domain(format!("t1 must be finite and nonnegative, got {t1}"));
    }
    let est = numeric::integrate(
        |e| {
            let s = numeric::sinc(e * t1);
            s * s
        },
        band.delta_min,
        band.delta_max,
        2.0 * t1,
        &QuadConfig::tight(),
    )?;
    Ok(est.value / band.width())
}

/// Long-time form of [`superiteration_limit_rsn`]:
/// `(Δmax − Δmin)⁻¹ · (1 / 2t₁²) · (1/Δmin − 1/Δmax)`.
pub fn asymptotic_rsn(band: &BandModel, t1: f64) -> f64 {
    if t1 * band.delta_min <= 10.0 {
        log::warn!(
            "asymptotic residual norm used outside its regime: t1·delta_min = {}",
            t1 * band.delta_min
        );
    }
    (1.0 / band.delta_min - 1.0 / band.delta_max) / (2.0 * t1 * t1 * band.width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    // Composite Simpson rule, independent of the crate's integrator.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    fn i_oracle(delta: f64, times: &[f64]) -> f64 {
        simpson(
            |e| times.iter().map(|t| 2.0 + 2.0 * (e * t).cos()).product(),
            -delta,
            delta,
            400_000,
        )
    }

    fn table1() -> BandModel {
        BandModel::new(0.1, 1.0).unwrap()
    }

    #[test]
    fn sinc_sum_of_empty_schedule() {
        assert_relative_eq!(sinc_sum_i(0.7, &TimeSchedule::empty()).unwrap(), 1.4);
    }

    #[test]
    fn sinc_sum_matches_quadrature_single_time() {
        let s = TimeSchedule::new(vec![PI]).unwrap();
        let exact = sinc_sum_i(1.0, &s).unwrap();
        // ∫_{−1}^{1} (2 + 2cos πE) dE = 4
        assert_relative_eq!(exact, 4.0, max_relative = 1e-14);
        assert_relative_eq!(exact, i_oracle(1.0, &[PI]), max_relative = 1e-10);
    }

    #[test]
    fn sinc_sum_matches_quadrature_five_times() {
        let times = [0.83, 2.71, 1.49, 4.02, 0.37];
        let exact = sinc_sum_i(1.0, &TimeSchedule::new(times.to_vec()).unwrap()).unwrap();
        assert_relative_eq!(exact, i_oracle(1.0, &times), max_relative = 1e-10);
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let s = TimeSchedule::new(vec![1.0; MAX_ENUMERATION + 1]).unwrap();
        assert!(matches!(sinc_sum_i(1.0, &s), Err(Error::EnumerationBound { .. })));
        assert!(rsn_closed_form(&table1(), &s).is_err());
        // Exact zeros do not count.
        let mut t = vec![1.0; 3];
        t.extend(vec![0.0; 30]);
        assert!(rsn_closed_form(&table1(), &TimeSchedule::new(t).unwrap()).is_ok());
    }

    #[test]
    fn optimized_rows_reproduce_quoted_values() {
        let rows: [(&[f64], f64, f64); 2] = [
            (&[0.449, 4.956, 10.302], 0.153, 0.002),
            (&[3.323, 4.210, 5.738, 7.843, 11.097, 14.557, 19.829, 27.650], 7.42e-5, 5e-6),
        ];
        for (times, expected, tol) in rows {
            let s = TimeSchedule::new(times.to_vec()).unwrap();
            let z = rsn_unit_density(&table1(), &s).unwrap();
            assert!((z - expected).abs() <= tol, "{z} vs {expected}");
            let zn = rsn_closed_form(&table1(), &s).unwrap();
            assert_relative_eq!(z, 1.8 * zn, max_relative = 1e-14);
        }
        assert_relative_eq!(rsn_closed_form(&table1(), &TimeSchedule::empty()).unwrap(), 1.0);
        assert_relative_eq!(rsn_unit_density(&table1(), &TimeSchedule::empty()).unwrap(), 1.8);
    }

    #[test]
    fn closed_form_matches_band_quadrature() {
        let band = table1();
        let s = TimeSchedule::new(vec![3.463, 4.300, 8.058, 15.596]).unwrap();
        let a = rsn_closed_form(&band, &s).unwrap();
        let b = spectral::rsn_quadrature_with(&band.spectral_function(), 0.0, &s, &QuadConfig::tight()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
        assert!((unit_density_scale(&band) * b - 0.0335).abs() <= 0.0005);
    }

    #[test]
    fn large_n_uses_parallel_partition() {
        let band = table1();
        let times: Vec<f64> = (0..12).map(|i| 0.5 + 0.37 * i as f64).collect();
        let s = TimeSchedule::new(times).unwrap();
        let a = rsn_closed_form(&band, &s).unwrap();
        let b = spectral::rsn_quadrature_with(&band.spectral_function(), 0.0, &s, &QuadConfig::tight()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }

    #[test]
    fn superiteration_limit_small_and_large_t1() {
        let band = table1();
        assert_relative_eq!(superiteration_limit_rsn(&band, 1e-9).unwrap(), 1.0, max_relative = 1e-12);
        let exact = superiteration_limit_rsn(&band, 100.0).unwrap();
        let asym = asymptotic_rsn(&band, 100.0);
        assert!((exact - asym).abs() / exact < 0.05);
    }

    #[test]
    fn superiteration_limit_matches_truncated_geometric_schedule() {
        let band = table1();
        let t1 = 10.0;
        let times: Vec<f64> = (0..60).map(|n| t1 * 0.5f64.powi(n)).collect();
        let s = TimeSchedule::new(times).unwrap();
        let q = spectral::rsn_quadrature_with(&band.spectral_function(), 0.0, &s, &QuadConfig::tight()).unwrap();
        let lim = superiteration_limit_rsn(&band, t1).unwrap();
        assert!((q - lim).abs() < 1e-4, "{q} vs {lim}");
    }

    #[test]
    fn asymptotic_examples() {
        let band = table1();
        // (1/(2·100²))·(10 − 1)/0.9
        assert_relative_eq!(asymptotic_rsn(&band, 100.0), 5e-4, max_relative = 1e-12);
        let narrow = BandModel::new(0.5, 1.0).unwrap();
        assert_relative_eq!(asymptotic_rsn(&narrow, 100.0), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(
            asymptotic_rsn(&band, 1000.0) / asymptotic_rsn(&band, 100.0),
            1e-2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn limit_times_t1_squared_converges() {
        let band = table1();
        let limit = 0.5 * (1.0 / band.delta_min - 1.0 / band.delta_max) / band.width();
        let ratios: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&t| superiteration_limit_rsn(&band, t).unwrap() * t * t / limit)
            .collect();
        assert!((ratios[1] - 1.0).abs() < (ratios[0] - 1.0).abs());
        assert!((ratios[2] - 1.0).abs() < 0.01, "{ratios:?}");
    }

    #[test]
    fn band_model_validation() {
        assert!(BandModel::new(0.0, 1.0).is_err());
        assert!(BandModel::new(1.0, 1.0).is_err());
        assert!(BandModel::new(0.2, 0.1).is_err());
    }
}
