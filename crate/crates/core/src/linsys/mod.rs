//! Linear expectation-value dynamics over a finite transition-operator basis.
//!
//! A [`Generator`] holds `M` in `d⟨σ⟩/dt = M⟨σ⟩`. On top of it this module
//! provides adaptive time integration, regression-theorem correlations and
//! power spectra, either by quadrature of a sampled correlation or directly
//! from the resolvent `(iδ − M)⁻¹`.

mod basis;
mod generator;
mod integrate;
mod regression;
mod spectrum;

pub use num_complex::Complex64 as C64;

pub use basis::{Label, OperatorBasis};
pub use generator::{Generator, GeneratorBuilder};
pub use integrate::{integrate, uniform_grid, ExpectationTrajectory, IntegratorOptions, Snapshot};
pub use regression::{
    correlation, evolve_seed, reduce, seed_regression, seed_sandwich, stationary_value, suggest_tau_grid,
    CorrelationFunction, ReducedProblem, TauGridOptions,
};
pub use spectrum::{
    regression_spectrum, resolvent_from_seed, spectrum_quadrature, spectrum_resolvent, symmetric_grid,
    QuadratureOptions, ResolventOptions, Spectrum, SpectrumMethod, SpectrumOptions,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsysError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("correlation has not decayed at τ_max: residual {residual_fraction:.3e} of peak")]
    InsufficientDecay { residual_fraction: f64 },
    #[error("regression seed has a non-decaying component ({residual_fraction:.3e} of seed)")]
    NonDecaying { residual_fraction: f64 },
    #[error("(iδ − M) is near-singular at δ = {delta} (condition estimate {condition:.3e})")]
    NearSingular { delta: f64, condition: f64 },
}
