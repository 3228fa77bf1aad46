//! One-dimensional search: log-spaced grid scan plus golden-section
//! refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for a minimum of `f` in `[lo, hi]`, stopping once
/// the bracket is narrower than `tol(x)` at the current best point.
pub fn golden_section<F, T>(f: F, mut lo: f64, mut hi: f64, tol: T) -> ScalarMinimum
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evaluations = 2;
    while hi - lo > tol(if f1 <= f2 { x1 } else { x2 }) && evaluations < 400 {
        // Ties keep the lower point.
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evaluations += 1;
    }
    if f1 <= f2 {
        ScalarMinimum {
            x: x1,
            value: f1,
            evaluations,
        }
    } else {
        ScalarMinimum {
            x: x2,
            value: f2,
            evaluations,
        }
    }
}

/// `n` points `lo + (hi − lo)·10^u` with `u` evenly spaced in
/// `[log10(min_fraction), 0]`, ascending.
pub fn log_offsets(lo: f64, hi: f64, n: usize, min_fraction: f64) -> Vec<f64> {
    let n = n.max(2);
    let u0 = min_fraction.log10();
    (0..n)
        .map(|k| {
            let u = u0 * (1.0 - k as f64 / (n - 1) as f64);
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * 10f64.powf(u)
            }
        })
        .collect()
}

/// Index of the smallest value, resolving ties within `rel_tol` of the
/// minimum to the lowest index.
pub fn argmin_with_ties(values: &[f64], rel_tol: f64) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = min + rel_tol * min.abs();
    values.iter().position(|&v| v <= cut).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let m = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, |_| 1e-9);
        assert!((m.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn log_offsets_span_the_interval() {
        let g = log_offsets(1.0, 2.0, 200, 1e-4);
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1.0001).abs() < 1e-12);
        assert_eq!(g[199], 2.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ties_go_to_the_first_index() {
        assert_eq!(argmin_with_ties(&[3.0, 1.0, 1.0 + 1e-12, 0.5], 0.0), 3);
        assert_eq!(argmin_with_ties(&[1.0, 1.0, 1.0], 1e-9), 0);
        assert_eq!(argmin_with_ties(&[2.0, 1.0 + 1e-12, 1.0], 1e-9), 1);
    }
}
