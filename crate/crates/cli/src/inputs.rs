//! Flag groups shared by several commands and what they resolve to.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use rodeo_core::closed_form::{self, BandModel};
use rodeo_core::hamiltonians::{
    self, build_sector_hamiltonian, eigendecompose, make_initial_state, Boundary, EigenSystem, HamiltonianSpec,
    InitialStateKind, OverlapSpectrum, Sector,
};
use rodeo_core::optimizer::{spectral_gap, OptimizationConfig, Preset};
use rodeo_core::schedules::{gaussian_random_schedule, superiteration_schedule};
use rodeo_core::spectral::{self, Band, Density};
use rodeo_core::{GaussianScheduleParams, QuadConfig, RodeoResult, SpectralFunction, SuperiterationParams, TimeSchedule};

use crate::Cli;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    /// `∝ e^{−E²}` on [0, 1].
    Gaussian,
    /// `∝ 1` on [0, 1].
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityArg {
    Constant,
    Gaussian,
}

/// Where the initial spectral weight comes from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    /// Spectral function file: CSV `energy,weight` rows or a JSON band/discrete descriptor.
    #[arg(long, conflicts_with = "preset")]
    pub spectrum: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,

    /// Lower band edge (default 0.1 when no file or preset is given).
    #[arg(long, allow_hyphen_values = true)]
    pub band_min: Option<f64>,

    /// Upper band edge (default 1).
    #[arg(long, allow_hyphen_values = true)]
    pub band_max: Option<f64>,

    #[arg(long, value_enum, default_value_t = DensityArg::Constant)]
    pub density: DensityArg,

    /// Target energy E_t.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub target: f64,

    /// Target weight for band spectra, used for fidelities.
    #[arg(long)]
    pub target_weight: Option<f64>,

    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
}

impl SpectrumArgs {
    pub fn resolve(&self) -> Result<SpectralFunction> {
        if let Some(path) = &self.spectrum {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let is_json = path.extension().is_some_and(|e| e == "json");
            let spec = if is_json {
                SpectralFunction::from_json_str(&text)
            } else {
                SpectralFunction::from_csv_reader(text.as_bytes())
            };
            return spec.with_context(|| format!("in {}", path.display()));
        }
        if let Some(p) = self.preset {
            return Ok(match p {
                PresetArg::Gaussian => Preset::Gaussian,
                PresetArg::Flat => Preset::Flat,
            }
            .spectral_function());
        }
        let density = match self.density {
            DensityArg::Constant => Density::Constant,
            DensityArg::Gaussian => Density::Gaussian,
        };
        let band = Band::new(self.band_min.unwrap_or(0.1), self.band_max.unwrap_or(1.0), density)?;
        Ok(SpectralFunction::band(band)?)
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig::with_abs_tol(self.quad_tol)
    }
}

/// A flat, unit-weight band strictly above the target, where the closed
/// form applies.
pub fn closed_form_band(spec: &SpectralFunction, target: f64) -> Option<BandModel> {
    match spec {
        SpectralFunction::ContinuousBand(b) if b.density == Density::Constant && b.weight == 1.0 => {
            BandModel::new(b.delta_min - target, b.delta_max - target).ok()
        }
        _ => None,
    }
}

/// How a schedule is given. The first applicable source wins: explicit
/// times, a file, a geometric ratio, a random width; otherwise the schedule
/// is empty.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ScheduleArgs {
    /// Comma-separated evolution times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,

    /// Schedule file: one time per line (CSV) or a JSON array.
    #[arg(long)]
    pub schedule: Option<PathBuf>,

    /// Geometric ratio; needs --n-samples and --total-time.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Half-Gaussian width of a random schedule; needs --n-samples.
    #[arg(long)]
    pub sigma: Option<f64>,

    #[arg(long)]
    pub n_samples: Option<usize>,

    #[arg(long)]
    pub total_time: Option<f64>,
}

impl ScheduleArgs {
    pub fn resolve(&self, seed: u64) -> Result<TimeSchedule> {
        if let Some(t) = &self.times {
            return Ok(TimeSchedule::new(t.clone())?);
        }
        if let Some(path) = &self.schedule {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let s = if path.extension().is_some_and(|e| e == "json") {
                TimeSchedule::from_json_str(&text)
            } else {
                TimeSchedule::from_csv_reader(text.as_bytes())
            };
            return s.with_context(|| format!("in {}", path.display()));
        }
        if let Some(alpha) = self.alpha {
            let (Some(n), Some(t)) = (self.n_samples, self.total_time) else {
                bail!("--alpha needs --n-samples and --total-time");
            };
            return Ok(superiteration_schedule(&SuperiterationParams::new(alpha, n, t)?)?);
        }
        if let Some(sigma) = self.sigma {
            let Some(n) = self.n_samples else {
                bail!("--sigma needs --n-samples");
            };
            return Ok(gaussian_random_schedule(&GaussianScheduleParams {
                sigma,
                n_samples: n,
                seed,
            })?);
        }
        Ok(TimeSchedule::empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Xx,
    Tfim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorArg {
    Auto,
    ZeroMagnetization,
    EvenParity,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialArg {
    /// A sector basis vector, see --basis-index.
    Basis,
    /// Product of the two half-chain ground states (XX).
    Fusion,
    /// `|+⟩^⊗L` (TFIM).
    Plus,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,

    #[arg(long, default_value_t = 10)]
    pub length: usize,

    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub coupling: f64,

    /// Transverse field h (TFIM).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub field: f64,

    /// Default: open for XX, periodic for TFIM.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,

    #[arg(long, value_enum, default_value_t = SectorArg::Auto)]
    pub sector: SectorArg,

    /// Default: basis vector 1 for XX, |+⟩ for TFIM.
    #[arg(long, value_enum)]
    pub initial_state: Option<InitialArg>,

    #[arg(long, default_value_t = 1)]
    pub basis_index: usize,
}

/// Diagonalized chain with its initial state resolved against the ground
/// energy.
pub struct ChainSystem {
    pub spec: HamiltonianSpec,
    pub eig: EigenSystem,
    pub overlaps: Vec<f64>,
    pub spectrum: OverlapSpectrum,
}

impl ChainSystem {
    pub fn gap(&self) -> Result<f64> {
        self.eig
            .gap()
            .context("sector has a single distinct eigenvalue; no gap to define T₀")
    }
}

impl ModelArgs {
    pub fn hamiltonian(&self) -> Result<Option<HamiltonianSpec>> {
        let Some(model) = self.model else {
            return Ok(None);
        };
        let mut spec = match model {
            ModelArg::Xx => HamiltonianSpec::xx(self.length, self.coupling),
            ModelArg::Tfim => HamiltonianSpec::tfim(self.length, self.coupling, self.field),
        };
        if let Some(b) = self.boundary {
            spec = spec.with_boundary(match b {
                BoundaryArg::Open => Boundary::Open,
                BoundaryArg::Periodic => Boundary::Periodic,
            });
        }
        spec = spec.with_sector(match self.sector {
            SectorArg::Auto => Sector::Auto,
            SectorArg::ZeroMagnetization => Sector::ZeroMagnetization,
            SectorArg::EvenParity => Sector::EvenParity,
            SectorArg::Full => Sector::Full,
        });
        spec.validate()?;
        Ok(Some(spec))
    }

    fn initial_kind(&self, spec: &HamiltonianSpec) -> InitialStateKind {
        let default = match spec.model {
            hamiltonians::Model::Xx => InitialArg::Basis,
            hamiltonians::Model::Tfim => InitialArg::Plus,
        };
        match self.initial_state.unwrap_or(default) {
            InitialArg::Basis => InitialStateKind::BasisIndex(self.basis_index),
            InitialArg::Fusion => InitialStateKind::Fusion,
            InitialArg::Plus => InitialStateKind::PlusProjected,
        }
    }

    pub fn system(&self) -> Result<Option<ChainSystem>> {
        let Some(spec) = self.hamiltonian()? else {
            return Ok(None);
        };
        let ham = build_sector_hamiltonian(&spec)?;
        let eig = eigendecompose(&ham.matrix)?;
        let psi = make_initial_state(&ham, self.initial_kind(&spec))?;
        let overlaps = eig.overlaps(&psi)?;
        let spectrum = eig.overlap_spectrum(&psi, eig.ground_energy())?;
        Ok(Some(ChainSystem {
            spec,
            eig,
            overlaps,
            spectrum,
        }))
    }
}

/// What a schedule is scored against.
pub enum Backend {
    /// Objective `ζ`; closed form when `band` is set.
    Spectral {
        spec: SpectralFunction,
        target: f64,
        target_weight: Option<f64>,
        band: Option<BandModel>,
        quad: QuadConfig,
        failures: AtomicUsize,
    },
    /// Objective `1 − F`.
    Chain(Box<ChainSystem>),
}

impl Backend {
    /// A chain when `--model` is given, else the spectral function.
    pub fn from_args(model: &ModelArgs, spectrum: &SpectrumArgs) -> Result<Self> {
        if let Some(sys) = model.system()? {
            return Ok(Backend::Chain(Box::new(sys)));
        }
        let spec = spectrum.resolve()?;
        let band = closed_form_band(&spec, spectrum.target);
        Ok(Backend::Spectral {
            target_weight: spectrum.target_weight,
            target: spectrum.target,
            band,
            quad: spectrum.quad(),
            failures: AtomicUsize::new(0),
            spec,
        })
    }

    pub fn t0(&self) -> Result<f64> {
        Ok(match self {
            Backend::Spectral { spec, target, .. } => PI / spectral_gap(spec, *target)?,
            Backend::Chain(sys) => PI / sys.gap()?,
        })
    }

    /// `ζ` for spectra, `1 − F` for chains.
    pub fn objective(&self, s: &TimeSchedule) -> f64 {
        match self {
            Backend::Spectral {
                spec,
                target,
                band,
                quad,
                failures,
                ..
            } => {
                if let Some(b) = band {
                    if let Ok(z) = closed_form::band_rsn(b, s, quad) {
                        return z;
                    }
                }
                match spectral::rsn_quadrature_with(spec, *target, s, quad) {
                    Ok(z) => z,
                    Err(e) => {
                        failures.fetch_add(1, Ordering::Relaxed);
                        e.estimate
                    }
                }
            }
            Backend::Chain(sys) => sys.spectrum.evaluate(s).infidelity().unwrap_or(1.0),
        }
    }

    pub fn evaluate(&self, s: &TimeSchedule) -> RodeoResult {
        match self {
            Backend::Spectral { spec, target, target_weight, .. } => {
                let tw = target_weight.or(match spec {
                    SpectralFunction::Discrete { .. } => Some(spec.target_weight(*target)),
                    SpectralFunction::ContinuousBand(_) => None,
                });
                RodeoResult::new(tw, self.objective(s))
            }
            Backend::Chain(sys) => sys.spectrum.evaluate(s),
        }
    }

    /// Column label of [`Backend::metric`].
    pub fn metric_name(&self, raw: bool) -> &'static str {
        match self {
            Backend::Chain(_) if raw => "raw_fidelity",
            Backend::Chain(_) => "fidelity",
            Backend::Spectral { .. } => "zeta",
        }
    }

    /// The reported figure of merit: fidelity (or raw fidelity) for chains,
    /// `ζ` for spectra.
    pub fn metric(&self, s: &TimeSchedule, raw: bool) -> f64 {
        let r = self.evaluate(s);
        match self {
            Backend::Chain(_) if raw => r.raw_fidelity.unwrap_or(f64::NAN),
            Backend::Chain(_) => r.fidelity.unwrap_or(f64::NAN),
            Backend::Spectral { .. } => r.zeta,
        }
    }

    /// Same as [`Backend::metric`] from an objective value.
    pub fn metric_from_objective(&self, objective: f64, raw: bool) -> f64 {
        match self {
            Backend::Chain(sys) if raw => sys.spectrum.target_weight,
            Backend::Chain(_) => 1.0 - objective,
            Backend::Spectral { .. } => objective,
        }
    }

    pub fn quadrature_failures(&self) -> usize {
        match self {
            Backend::Spectral { failures, .. } => failures.load(Ordering::Relaxed),
            Backend::Chain(_) => 0,
        }
    }
}

/// Optimizer settings from the global flags.
pub fn optimization_config(cli: &Cli) -> OptimizationConfig {
    let mut cfg = OptimizationConfig {
        seed: cli.seed,
        ..Default::default()
    };
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    if let Some(r) = cli.restarts {
        cfg.restarts = r;
    }
    cfg
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        bail!("log grid needs 0 < lo <= hi and at least one point, got [{lo}, {hi}] with {n}");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect())
}
