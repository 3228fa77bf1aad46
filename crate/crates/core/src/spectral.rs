//! Spectral functions, time schedules and the quantities a rodeo schedule
//! produces: the residual spectral norm `ζ`, the post-selection success
//! probability and the fidelity with the target eigenstate.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::numeric::{self, CompensatedSum, QuadConfig, QuadratureError};
use crate::{domain, Error, Result};

/// Schedule entries below this are dropped when canonicalizing.
pub const TIME_FLOOR: f64 = 1e-6;

/// Relative width of the energy window treated as the target level.
pub const TARGET_TOLERANCE: f64 = 1e-10;

/// Per-cycle surviving weight `cos²((E − E_t)·t/2)`.
#[inline]
pub fn success_probability(energy: f64, target: f64, time: f64) -> f64 {
    let c = ((energy - target) * time * 0.5).cos();
    c * c
}

/// `∏ₙ cos²((E − E_t)·tₙ/2)` over a schedule.
#[inline]
pub fn suppression_factor(energy: f64, target: f64, times: &[f64]) -> f64 {
    let half = 0.5 * (energy - target);
    times
        .iter()
        .map(|&t| {
            let c = (half * t).cos();
            c * c
        })
        .product()
}

/// Time that perfectly suppresses a level `delta_min` away from the
/// target: `π / delta_min`.
pub fn characteristic_time(delta_min: f64) -> Result<f64> {
    if !(delta_min > 0.0) || !delta_min.is_finite() {
        return domain(format!("characteristic time needs delta_min > 0, got {delta_min}"));
    }
    Ok(PI / delta_min)
}

/// Whether `energy` falls in the target window around `target`.
#[inline]
pub fn is_target_level(energy: f64, target: f64) -> bool {
    (energy - target).abs() < TARGET_TOLERANCE * target.abs().max(1.0)
}

/// Post-selection normalized fidelity `w / (w + ζ)`.
pub fn fidelity_from_overlaps(target_weight: f64, zeta: f64) -> Result<f64> {
    if !(target_weight >= 0.0) || !(zeta >= 0.0) {
        return domain(format!(
            "fidelity needs nonnegative weights, got target {target_weight}, residual {zeta}"
        ));
    }
    if target_weight + zeta <= 0.0 {
        return domain("fidelity undefined when target weight and residual are both zero");
    }
    Ok(target_weight / (target_weight + zeta))
}

/// Ordered nonnegative evolution times with their total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeSchedule {
    times: Vec<f64>,
    total_time: f64,
}

impl TimeSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "schedule times must be finite and nonnegative, got {bad}"
            )));
        }
        let total_time = numeric::compensated_sum(times.iter().copied());
        Ok(Self { times, total_time })
    }

    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            total_time: 0.0,
        }
    }

    /// Builds a schedule and drops entries below [`TIME_FLOOR`].
    pub fn canonical(times: Vec<f64>) -> Result<Self> {
        Ok(Self::new(times)?.canonicalized())
    }

    pub fn canonicalized(&self) -> Self {
        let times: Vec<f64> = self.times.iter().copied().filter(|&t| t >= TIME_FLOOR).collect();
        let total_time = numeric::compensated_sum(times.iter().copied());
        Self { times, total_time }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn appended(&self, time: f64) -> Result<Self> {
        let mut times = self.times.clone();
        times.push(time);
        Self::new(times)
    }

    /// Largest entry first.
    pub fn sorted_descending(&self) -> Self {
        let mut times = self.times.clone();
        times.sort_by(|a, b| b.total_cmp(a));
        Self {
            times,
            total_time: self.total_time,
        }
    }

    /// Reads one time per line. Blank lines, `#` comments and a
    /// non-numeric first line (a header) are skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut text = String::new();
        let mut reader = reader;
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut times = Vec::new();
        let mut seen_data = false;
        for (i, line) in text.lines().enumerate() {
            let field = line.split(',').next().unwrap_or("").trim();
            if field.is_empty() || field.starts_with('#') {
                continue;
            }
            match field.parse::<f64>() {
                Ok(t) => {
                    seen_data = true;
                    times.push(t);
                }
                Err(_) if !seen_data && times.is_empty() => {
                    // header
                    seen_data = true;
                }
                Err(e) => {
                    return Err(Error::Parse {
                        location: format!("line {}, field time", i + 1),
                        message: e.to_string(),
                    })
                }
            }
        }
        Self::new(times)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("time\n");
        for t in &self.times {
            out.push_str(&format!("{t:.17e}\n"));
        }
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

impl TryFrom<Vec<f64>> for TimeSchedule {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeSchedule> for Vec<f64> {
    fn from(s: TimeSchedule) -> Self {
        s.times
    }
}

/// Shape of a continuous band's weight `|ξ(E)|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Constant,
    /// `e^{-E²}` in absolute energy.
    Gaussian,
    /// Linear interpolation through `[E, w]` points, zero outside them.
    Tabulated(Vec<[f64; 2]>),
}

/// A continuous band of energies `[delta_min, delta_max]`.
///
/// Edges are absolute energies; with the target shifted to zero they are
/// the smallest and largest excitation gaps. The density shape is
/// normalized over the band and scaled by `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub delta_min: f64,
    pub delta_max: f64,
    pub density: Density,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl Band {
    pub fn new(delta_min: f64, delta_max: f64, density: Density) -> Result<Self> {
        let band = Self {
            delta_min,
            delta_max,
            density,
            weight: 1.0,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn constant(delta_min: f64, delta_max: f64) -> Result<Self> {
        Self::new(delta_min, delta_max, Density::Constant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_min.is_finite() && self.delta_max.is_finite() && self.delta_max > self.delta_min)
        {
            return domain(format!(
                "band needs finite edges with delta_max > delta_min, got [{}, {}]",
                self.delta_min, self.delta_max
            ));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return domain(format!("band weight must be nonnegative, got {}", self.weight));
        }
        if let Density::Tabulated(points) = &self.density {
            if points.len() < 2 {
                return Err(Error::InvalidInput("tabulated density needs at least two points".into()));
            }
            if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::InvalidInput("tabulated energies must be strictly increasing".into()));
            }
            if points.iter().any(|p| !(p[1] >= 0.0) || !p[0].is_finite()) {
                return Err(Error::InvalidInput("tabulated weights must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    fn shape(&self, e: f64) -> f64 {
        match &self.density {
            Density::Constant => 1.0,
            Density::Gaussian => (-e * e).exp(),
            Density::Tabulated(points) => interpolate(points, e),
        }
    }

    fn shape_integral(&self) -> f64 {
        let (lo, hi) = (self.delta_min, self.delta_max);
        match &self.density {
            Density::Constant => hi - lo,
            Density::Gaussian => {
                0.5 * PI.sqrt() * (statrs::function::erf::erf(hi) - statrs::function::erf::erf(lo))
            }
            Density::Tabulated(points) => linear_integral(points, lo, hi),
        }
    }

    /// Normalized density times the band weight.
    pub fn density_at(&self, e: f64) -> f64 {
        if e < self.delta_min || e > self.delta_max {
            return 0.0;
        }
        let norm = self.shape_integral();
        if norm <= 0.0 {
            return 0.0;
        }
        self.weight * self.shape(e) / norm
    }

    /// Breakpoints of the density inside the band, including both edges.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.delta_min];
        if let Density::Tabulated(points) = &self.density {
            pts.extend(
                points
                    .iter()
                    .map(|p| p[0])
                    .filter(|&e| e > self.delta_min && e < self.delta_max),
            );
        }
        pts.push(self.delta_max);
        pts
    }
}

fn interpolate(points: &[[f64; 2]], e: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if e < first[0] || e > last[0] {
        return 0.0;
    }
    let i = points.partition_point(|p| p[0] <= e);
    if i == 0 {
        return first[1];
    }
    if i == points.len() {
        return last[1];
    }
    let [x0, y0] = points[i - 1];
    let [x1, y1] = points[i];
    y0 + (y1 - y0) * (e - x0) / (x1 - x0)
}

// Exact integral of the linear interpolant over [lo, hi].
fn linear_integral(points: &[[f64; 2]], lo: f64, hi: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for w in points.windows(2) {
        let a = w[0][0].max(lo);
        let b = w[1][0].min(hi);
        if b > a {
            acc.add(0.5 * (b - a) * (interpolate(points, a) + interpolate(points, b)));
        }
    }
    acc.value()
}

/// Initial weight distribution `|ξ(E)|²` over the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectralFunction {
    Discrete { energies: Vec<f64>, weights: Vec<f64> },
    ContinuousBand(Band),
}

impl SpectralFunction {
    pub fn discrete(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let spec = Self::Discrete { energies, weights };
        spec.validate()?;
        Ok(spec)
    }

    pub fn band(band: Band) -> Result<Self> {
        band.validate()?;
        Ok(Self::ContinuousBand(band))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Discrete { energies, weights } => {
                if energies.len() != weights.len() {
                    return Err(Error::InvalidInput(format!(
                        "{} energies but {} weights",
                        energies.len(),
                        weights.len()
                    )));
                }
                if energies.iter().any(|e| !e.is_finite()) {
                    return Err(Error::InvalidInput("energies must be finite".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if total > 1.0 + 1e-9 {
                    return Err(Error::InvalidInput(format!("weights sum to {total} > 1")));
                }
                Ok(())
            }
            Self::ContinuousBand(band) => band.validate(),
        }
    }

    /// Weight pooled at the target energy.
    pub fn target_weight(&self, target: f64) -> f64 {
        match self {
            Self::Discrete { energies, weights } => numeric::compensated_sum(
                energies
                    .iter()
                    .zip(weights)
                    .filter(|(e, _)| is_target_level(**e, target))
                    .map(|(_, w)| *w),
            ),
            Self::ContinuousBand(_) => 0.0,
        }
    }

    /// Non-target weight before any suppression.
    pub fn residual_weight(&self, target: f64) -> f64 {
        match self {
            Self::Discrete { energies, weights } => numeric::compensated_sum(
                energies
                    .iter()
                    .zip(weights)
                    .filter(|(e, _)| !is_target_level(**e, target))
                    .map(|(_, w)| *w),
            ),
            Self::ContinuousBand(band) => band.weight,
        }
    }

    /// Reads `energy,weight` rows after a required header line.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_error("line 1", e))?
            .clone();
        if headers.len() < 2 || headers.get(0).and_then(|h| h.parse::<f64>().ok()).is_some() {
            return Err(Error::Parse {
                location: "line 1".into(),
                message: "expected header row `energy,weight`".into(),
            });
        }
        let mut energies = Vec::new();
        let mut weights = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| parse_error("record", e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |idx: usize, name: &str| -> Result<f64> {
                let raw = record.get(idx).ok_or_else(|| Error::Parse {
                    location: format!("line {line}, field {name}"),
                    message: "missing field".into(),
                })?;
                raw.parse::<f64>().map_err(|e| Error::Parse {
                    location: format!("line {line}, field {name}"),
                    message: format!("{e}: {raw:?}"),
                })
            };
            energies.push(field(0, "energy")?);
            weights.push(field(1, "weight")?);
        }
        Self::discrete(energies, weights)
    }

    /// Parses a band descriptor
    /// `{"delta_min":…, "delta_max":…, "density":"constant"|"gaussian"|{"tabulated":[[E,w],…]}}`
    /// or a discrete `{"energies":[…], "weights":[…]}` object.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_error(location: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        location: location.into(),
        message: e.to_string(),
    }
}

/// Applies the schedule's per-level suppression to a spectral function.
///
/// Discrete weights are multiplied by the suppression factor; target
/// levels are left untouched. A continuous band comes back as a tabulated
/// density sampled finely enough to follow the oscillating factor.
pub fn apply_schedule(spec: &SpectralFunction, target: f64, sched: &TimeSchedule) -> SpectralFunction {
    match spec {
        SpectralFunction::Discrete { energies, weights } => {
            let weights = energies
                .iter()
                .zip(weights)
                .map(|(&e, &w)| {
                    if is_target_level(e, target) {
                        w
                    } else {
                        w * suppression_factor(e, target, sched.times())
                    }
                })
                .collect();
            SpectralFunction::Discrete {
                energies: energies.clone(),
                weights,
            }
        }
        SpectralFunction::ContinuousBand(band) => {
            let (lo, hi) = (band.delta_min, band.delta_max);
            let freq = sched.total_time().max(1.0);
            // π/16 phase per grid step, capped at 2^20 steps.
            let steps = (((hi - lo) * freq / (PI / 16.0)).ceil() as usize).clamp(256, 1 << 20);
            let mut grid: Vec<f64> = (0..=steps)
                .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
                .collect();
            grid.extend(band.breakpoints());
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let points: Vec<[f64; 2]> = grid
                .iter()
                .map(|&e| [e, band.density_at(e) * suppression_factor(e, target, sched.times())])
                .collect();
            let weight = linear_integral(&points, lo, hi);
            SpectralFunction::ContinuousBand(Band {
                delta_min: lo,
                delta_max: hi,
                density: Density::Tabulated(points),
                weight,
            })
        }
    }
}

/// Residual spectral norm `ζ` with the default quadrature tolerance.
pub fn rsn_quadrature(
    spec: &SpectralFunction,
    target: f64,
    sched: &TimeSchedule,
) -> Result<f64, QuadratureError> {
    rsn_quadrature_with(spec, target, sched, &QuadConfig::default())
}

/// Residual spectral norm `ζ = ∫ |ξ(E)|² ∏ₙ p(E, tₙ) dE` over non-target
/// energies; a plain sum for discrete spectra.
pub fn rsn_quadrature_with(
    spec: &SpectralFunction,
    target: f64,
    sched: &TimeSchedule,
    cfg: &QuadConfig,
) -> Result<f64, QuadratureError> {
    match spec {
        SpectralFunction::Discrete { energies, weights } => Ok(numeric::compensated_sum(
            energies
                .iter()
                .zip(weights)
                .filter(|(e, _)| !is_target_level(**e, target))
                .map(|(&e, &w)| w * suppression_factor(e, target, sched.times())),
        )),
        SpectralFunction::ContinuousBand(band) => {
            let norm = band.shape_integral();
            if norm <= 0.0 || band.weight == 0.0 {
                return Ok(0.0);
            }
            let scale = band.weight / norm;
            let times = sched.times();
            let freq = sched.total_time();
            let cuts = band.breakpoints();
            let mut value = CompensatedSum::new();
            let mut error = 0.0;
            let mut panels = 0;
            let mut failed = false;
            for w in cuts.windows(2) {
                let piece = numeric::integrate(
                    |e| band.shape(e) * suppression_factor(e, target, times),
                    w[0],
                    w[1],
                    freq,
                    &QuadConfig {
                        abs_tol: cfg.abs_tol / scale / (cuts.len() - 1) as f64,
                        ..*cfg
                    },
                );
                match piece {
                    Ok(est) => {
                        value.add(est.value);
                        error += est.error;
                        panels += est.panels;
                    }
                    Err(e) => {
                        value.add(e.estimate);
                        error += e.error;
                        panels += e.panels;
                        failed = true;
                    }
                }
            }
            let zeta = scale * value.value();
            if failed {
                Err(QuadratureError {
                    estimate: zeta,
                    error: scale * error,
                    panels,
                })
            } else {
                Ok(zeta)
            }
        }
    }
}

/// Outcome of running a schedule on a spectral function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodeoResult {
    /// Surviving non-target weight before post-selection.
    pub zeta: f64,
    /// Probability that every cycle succeeds: target weight plus `ζ`.
    pub success_probability: f64,
    /// Post-selection normalized fidelity, when a target weight is known.
    pub fidelity: Option<f64>,
    /// `|⟨ψ′|ψ₀⟩|²` with the unnormalized output state; equals the
    /// target weight because the target amplitude is preserved.
    pub raw_fidelity: Option<f64>,
}

impl RodeoResult {
    pub fn new(target_weight: Option<f64>, zeta: f64) -> Self {
        let tw = target_weight.unwrap_or(0.0);
        let fidelity = target_weight.and_then(|w| fidelity_from_overlaps(w, zeta).ok());
        Self {
            zeta,
            success_probability: (tw + zeta).min(1.0),
            fidelity,
            raw_fidelity: target_weight,
        }
    }

    /// `1 − F` computed as `ζ / (w + ζ)` so it keeps precision near `F = 1`.
    pub fn infidelity(&self) -> Option<f64> {
        let w = self.raw_fidelity?;
        if w + self.zeta <= 0.0 {
            return None;
        }
        Some(self.zeta / (w + self.zeta))
    }
}

/// Runs a schedule on a spectral function. Discrete spectra supply their
/// own target weight; for bands pass it explicitly.
pub fn evaluate(
    spec: &SpectralFunction,
    target: f64,
    sched: &TimeSchedule,
    target_weight: Option<f64>,
    cfg: &QuadConfig,
) -> Result<RodeoResult, QuadratureError> {
    let zeta = rsn_quadrature_with(spec, target, sched, cfg)?;
    let tw = match (spec, target_weight) {
        (_, Some(w)) => Some(w),
        (SpectralFunction::Discrete { .. }, None) => Some(spec.target_weight(target)),
        (SpectralFunction::ContinuousBand(_), None) => None,
    };
    Ok(RodeoResult::new(tw, zeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn success_probability_examples() {
        assert_eq!(success_probability(2.5, 2.5, 17.0), 1.0);
        assert!(success_probability(0.1, 0.0, PI / 0.1) < 1e-30);
        assert_relative_eq!(success_probability(1.0, 0.0, 1.0), 0.770_151_152_934_069_9, epsilon = 1e-12);
    }

    #[test]
    fn characteristic_time_examples() {
        assert_relative_eq!(characteristic_time(0.1).unwrap(), 10.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(characteristic_time(PI).unwrap(), 1.0);
        assert_relative_eq!(characteristic_time(1.0).unwrap(), PI);
        assert!(characteristic_time(0.0).is_err());
        assert!(characteristic_time(-1.0).is_err());
    }

    #[test]
    fn apply_schedule_discrete_examples() {
        let spec = SpectralFunction::discrete(vec![0.0], vec![0.3]).unwrap();
        let out = apply_schedule(&spec, 0.0, &TimeSchedule::new(vec![1.3, 7.0]).unwrap());
        assert_eq!(out, spec);

        let d = 0.7;
        let spec = SpectralFunction::discrete(vec![d], vec![1.0]).unwrap();
        let out = apply_schedule(&spec, 0.0, &TimeSchedule::new(vec![PI / d]).unwrap());
        let SpectralFunction::Discrete { weights, .. } = out else { unreachable!() };
        assert!(weights[0] < 1e-30);

        let spec = SpectralFunction::discrete(vec![0.1, 1.0], vec![0.5, 0.5]).unwrap();
        let out = apply_schedule(&spec, 0.0, &TimeSchedule::new(vec![1.0, 2.0]).unwrap());
        let SpectralFunction::Discrete { weights, .. } = out else { unreachable!() };
        let c = |x: f64| x.cos().powi(2);
        assert_relative_eq!(weights[0], 0.5 * c(0.05) * c(0.1), max_relative = 1e-15);
        assert_relative_eq!(weights[1], 0.5 * c(0.5) * c(1.0), max_relative = 1e-15);
    }

    #[test]
    fn rsn_of_empty_schedule_is_residual_weight() {
        let band = SpectralFunction::band(Band::constant(0.1, 1.0).unwrap()).unwrap();
        let z = rsn_quadrature(&band, 0.0, &TimeSchedule::empty()).unwrap();
        assert_relative_eq!(z, 1.0, max_relative = 1e-12);

        let spec = SpectralFunction::discrete(vec![0.0, 0.4, 0.9], vec![0.2, 0.3, 0.5]).unwrap();
        assert_relative_eq!(rsn_quadrature(&spec, 0.0, &TimeSchedule::empty()).unwrap(), 0.8);
        assert_relative_eq!(spec.target_weight(0.0), 0.2);
    }

    #[test]
    fn gaussian_and_tabulated_bands_normalize() {
        for density in [
            Density::Gaussian,
            Density::Tabulated(vec![[0.0, 1.0], [0.5, 3.0], [1.0, 0.0]]),
        ] {
            let band = SpectralFunction::band(Band::new(0.0, 1.0, density).unwrap()).unwrap();
            let z = rsn_quadrature(&band, -1.0, &TimeSchedule::empty()).unwrap();
            assert_relative_eq!(z, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn band_apply_schedule_integrates_to_rsn() {
        let band = SpectralFunction::band(Band::constant(0.1, 1.0).unwrap()).unwrap();
        let sched = TimeSchedule::new(vec![3.0, 7.5]).unwrap();
        let out = apply_schedule(&band, 0.0, &sched);
        let direct = rsn_quadrature(&band, 0.0, &sched).unwrap();
        let SpectralFunction::ContinuousBand(b) = &out else { unreachable!() };
        assert_relative_eq!(b.weight, direct, max_relative = 1e-4);
        let tab = rsn_quadrature(&out, 0.0, &TimeSchedule::empty()).unwrap();
        assert_relative_eq!(tab, direct, max_relative = 1e-4);
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity_from_overlaps(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(fidelity_from_overlaps(0.5, 0.5).unwrap(), 0.5);
        let f = fidelity_from_overlaps(7e-8, 0.999_999_9 * (1.0 - 7e-8)).unwrap();
        assert_relative_eq!(f, 7e-8, max_relative = 1e-6);
        assert!(fidelity_from_overlaps(0.0, 0.0).is_err());
        assert!(fidelity_from_overlaps(-0.1, 0.5).is_err());
    }

    #[test]
    fn rodeo_result_fidelity_identity() {
        let r = RodeoResult::new(Some(0.25), 0.5);
        assert_relative_eq!(r.fidelity.unwrap(), 0.25 / 0.75);
        assert_relative_eq!(r.infidelity().unwrap(), 0.5 / 0.75);
        assert_relative_eq!(r.success_probability, 0.75);
    }

    #[test]
    fn canonicalization_drops_tiny_times() {
        let s = TimeSchedule::canonical(vec![3.0, 5e-7, 0.0, 1.0]).unwrap();
        assert_eq!(s.times(), &[3.0, 1.0]);
        assert_eq!(s.total_time(), 4.0);
        assert!(TimeSchedule::new(vec![-1.0]).is_err());
        assert!(TimeSchedule::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_parsing_reports_line_and_field() {
        let ok = SpectralFunction::from_csv_reader("energy,weight\n0.0,0.5\n0.3,0.5\n".as_bytes()).unwrap();
        assert_eq!(ok.target_weight(0.0), 0.5);
        let err = SpectralFunction::from_csv_reader("energy,weight\n0.0,0.5\n0.3,abc\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3") && err.contains("weight"), "{err}");
        assert!(SpectralFunction::from_csv_reader("0.0,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn json_band_descriptor() {
        let s = SpectralFunction::from_json_str(r#"{"delta_min":0.1,"delta_max":1,"density":"constant"}"#).unwrap();
        assert_eq!(s, SpectralFunction::band(Band::constant(0.1, 1.0).unwrap()).unwrap());
        let s = SpectralFunction::from_json_str(
            r#"{"delta_min":0,"delta_max":1,"density":{"tabulated":[[0,1],[1,2]]}}"#,
        )
        .unwrap();
        assert!(matches!(s, SpectralFunction::ContinuousBand(Band { density: Density::Tabulated(_), .. })));
        assert!(SpectralFunction::from_json_str(r#"{"delta_min":1,"delta_max":0.5,"density":"constant"}"#).is_err());
    }

    #[test]
    fn schedule_text_formats() {
        let s = TimeSchedule::from_csv_reader("time\n1.5\n# note\n2.0\n".as_bytes()).unwrap();
        assert_eq!(s.times(), &[1.5, 2.0]);
        let back = TimeSchedule::from_csv_reader(s.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(TimeSchedule::from_json_str("[1.0, 2.5]").unwrap().total_time(), 3.5);
        assert!(TimeSchedule::from_csv_reader("1.0\nx\n".as_bytes()).is_err());
    }

    fn discrete_spec() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(0.0f64..1.0, n),
            )
                .prop_map(|(e, w)| {
                    let s: f64 = w.iter().sum::<f64>().max(1.0);
                    (e, w.into_iter().map(|x| x / s).collect())
                })
        })
    }

    proptest! {
        #[test]
        fn appending_a_time_never_increases_weights(
            (energies, weights) in discrete_spec(),
            times in prop::collection::vec(0.0f64..20.0, 0..6),
            extra in 0.0f64..20.0,
        ) {
            let spec = SpectralFunction::discrete(energies, weights).unwrap();
            let s0 = TimeSchedule::new(times).unwrap();
            let s1 = s0.appended(extra).unwrap();
            let (SpectralFunction::Discrete { weights: w0, .. }, SpectralFunction::Discrete { weights: w1, .. }) =
                (apply_schedule(&spec, 0.0, &s0), apply_schedule(&spec, 0.0, &s1)) else { unreachable!() };
            for (a, b) in w0.iter().zip(&w1) {
                prop_assert!(b <= a);
            }
            prop_assert!(rsn_quadrature(&spec, 0.0, &s1).unwrap() <= rsn_quadrature(&spec, 0.0, &s0).unwrap() * (1.0 + 1e-15));
        }

        #[test]
        fn target_weight_is_bit_identical(w in 0.0f64..1.0, times in prop::collection::vec(0.0f64..50.0, 0..8), et in -5.0f64..5.0) {
            let spec = SpectralFunction::discrete(vec![et, et + 0.3], vec![w, (1.0 - w) * 0.5]).unwrap();
            let out = apply_schedule(&spec, et, &TimeSchedule::new(times).unwrap());
            let SpectralFunction::Discrete { weights, .. } = out else { unreachable!() };
            prop_assert_eq!(weights[0].to_bits(), w.to_bits());
        }

        #[test]
        fn success_probability_is_periodic(e in -4.0f64..4.0, et in -4.0f64..4.0, t in 0.0f64..30.0) {
            prop_assume!((e - et).abs() > 1e-3);
            let period = 2.0 * PI / (e - et).abs();
            let a = success_probability(e, et, t);
            let b = success_probability(e, et, t + period);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn zeta_is_order_invariant((energies, weights) in discrete_spec(), mut times in prop::collection::vec(0.0f64..20.0, 1..7)) {
            let spec = SpectralFunction::discrete(energies, weights).unwrap();
            let z0 = rsn_quadrature(&spec, 0.0, &TimeSchedule::new(times.clone()).unwrap()).unwrap();
            times.reverse();
            let z1 = rsn_quadrature(&spec, 0.0, &TimeSchedule::new(times).unwrap()).unwrap();
            prop_assert!((z0 - z1).abs() <= 1e-14 * z0.max(1e-300));
        }
    }
}
