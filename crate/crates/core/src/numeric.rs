//! Small numerical building blocks: unnormalized sinc, compensated
//! summation and an adaptive Gauss–Kronrod integrator for oscillatory
//! integrands.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_4;

use crate::parallel;

/// `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Tolerances and work limit for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the number of panels after subdivision.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_panels: 200_000,
        }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_panels: 400_000,
        }
    }
}

/// Converged integral with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Quadrature stopped before meeting its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("quadrature did not converge: estimate {estimate:e} with error bound {error:e} after {panels} panels")]
pub struct QuadratureError {
    pub estimate: f64,
    pub error: f64,
    pub panels: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    // Error is at the rounding floor; bisecting cannot reduce it.
    at_floor: bool,
}

impl Panel {
    fn priority(&self) -> f64 {
        if self.at_floor {
            0.0
        } else {
            self.error
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // Largest reducible error first; ties broken by position so the order
    // is total.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority()
            .total_cmp(&other.priority())
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let mut at_floor = false;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 50.0 * f64::EPSILON * res_abs;
        at_floor = error <= floor;
        error = error.max(floor);
    }
    Panel {
        a,
        b,
        value,
        error,
        at_floor,
    }
}

/// Integrates `f` over `[a, b]`.
///
/// `max_frequency` is an upper bound on the angular frequency of the
/// integrand's oscillation. The interval is first cut so that the phase
/// advances by less than π/4 per panel, then panels with the largest error
/// are bisected until the total error meets the tolerance or every panel
/// is limited by rounding.
pub fn integrate<F>(
    f: F,
    a: f64,
    b: f64,
    max_frequency: f64,
    cfg: &QuadConfig,
) -> Result<QuadEstimate, QuadratureError>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    if a == b {
        return Ok(QuadEstimate {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let width = b - a;
    let phase = width.abs() * max_frequency.abs();
    let initial = ((phase / FRAC_PI_4).ceil() as usize).clamp(1, cfg.max_panels.max(1));
    let step = width / initial as f64;
    let panels = parallel::map_range(initial, |i| {
        let lo = a + step * i as f64;
        let hi = if i + 1 == initial {
            b
        } else {
            a + step * (i + 1) as f64
        };
        gauss_kronrod_21(&f, lo, hi)
    });

    let mut heap: BinaryHeap<Panel> = panels.into_iter().collect();
    loop {
        let total = compensated_sum(heap.iter().map(|p| p.value));
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        let floor_limited = heap.peek().is_some_and(|p| p.at_floor);
        if error <= tol || floor_limited {
            return Ok(QuadEstimate {
                value: ordered_total(&heap),
                error,
                panels: heap.len(),
            });
        }
        if heap.len() >= cfg.max_panels {
            return Err(QuadratureError {
                estimate: ordered_total(&heap),
                error,
                panels: heap.len(),
            });
        }
        // Bisect a batch of the worst panels per pass.
        let batch = (heap.len() / 8).clamp(1, cfg.max_panels - heap.len());
        let worst: Vec<Panel> = (0..batch).filter_map(|_| heap.pop()).collect();
        let halves = parallel::map_collect(&worst, |p| {
            let mid = 0.5 * (p.a + p.b);
            (gauss_kronrod_21(&f, p.a, mid), gauss_kronrod_21(&f, mid, p.b))
        });
        for (l, r) in halves {
            heap.push(l);
            heap.push(r);
        }
    }
}

// Sum panels left to right so the result does not depend on heap layout.
fn ordered_total(heap: &BinaryHeap<Panel>) -> f64 {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    compensated_sum(panels.into_iter().map(|p| p.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sinc_matches_series_near_zero() {
        assert_eq!(sinc(0.0), 1.0);
        assert_relative_eq!(sinc(1e-5), (1e-5f64).sin() / 1e-5, max_relative = 1e-15);
        assert_relative_eq!(sinc(2.0), 2.0f64.sin() / 2.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1.0, 1e-16, 1e-16, -1.0];
        assert_relative_eq!(compensated_sum(vals), 2e-16, max_relative = 1e-12);
    }

    #[test]
    fn integrates_polynomial_exactly() {
        let est = integrate(|x| x * x, 0.0, 3.0, 0.0, &QuadConfig::default()).unwrap();
        assert_relative_eq!(est.value, 9.0, max_relative = 1e-14);
    }

    #[test]
    fn integrates_oscillatory_cosine() {
        let w = 250.0;
        let est = integrate(|x| (w * x).cos(), 0.0, 1.0, w, &QuadConfig::tight()).unwrap();
        assert_relative_eq!(est.value, w.sin() / w, max_relative = 1e-12);
    }

    #[test]
    fn reports_nonconvergence_with_estimate() {
        let cfg = QuadConfig {
            abs_tol: 1e-300,
            rel_tol: 0.0,
            max_panels: 4,
        };
        let err = integrate(|x| x.sqrt(), 0.0, 1.0, 0.0, &cfg).unwrap_err();
        assert!((err.estimate - 2.0 / 3.0).abs() < 1e-3);
        assert!(err.error > 0.0);
    }
}
