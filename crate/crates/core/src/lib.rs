//! Time-schedule evaluation and optimization for the rodeo algorithm.
//!
//! The rodeo algorithm filters an input state toward the eigenstate at a
//! target energy `E_t`. Each cycle with evolution time `t` multiplies the
//! weight of an eigencomponent at energy `E` by `cos²((E − E_t)·t/2)`. This
//! crate works entirely in the Hamiltonian eigenbasis:
//!
//! * [`spectral`] holds spectral functions, schedules, the residual
//!   spectral norm by quadrature and post-selected fidelity.
//! * [`closed_form`] evaluates the residual norm of a flat band exactly.
//! * [`schedules`] generates geometric ("generalized superiteration"),
//!   half-Gaussian random and Trotter-rounded schedules.
//! * [`asymptotics`] studies the cosine product that governs long-time
//!   suppression.
//! * [`hamiltonians`] builds XX and transverse-field Ising benchmarks by
//!   exact diagonalization.
//! * [`optimizer`] searches schedules: full time vectors, the geometric
//!   ratio, adaptive ratio curves and the random-schedule width.
//!
//! Data-parallel loops go through [`parallel`], which falls back to
//! sequential execution when the `parallel` feature is disabled.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod closed_form;
pub mod hamiltonians;
pub mod numeric;
pub mod optimizer;
pub mod parallel;
pub mod schedules;
pub mod spectral;

pub use closed_form::BandModel;
pub use numeric::{QuadConfig, QuadratureError};
pub use schedules::{GaussianScheduleParams, SuperiterationParams};
pub use spectral::{Density, RodeoResult, SpectralFunction, TimeSchedule};

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} needs at most {max} entries, got {got}; use quadrature instead")]
    EnumerationBound {
        what: &'static str,
        max: usize,
        got: usize,
    },

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("{0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
