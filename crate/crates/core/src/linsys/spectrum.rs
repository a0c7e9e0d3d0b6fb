use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::integrate::Snapshot;
use super::regression::{reduce, seed_regression, stationary_projector, CorrelationFunction};
use super::{Generator, Label, LinsysError, C64};

/// Real power spectrum sampled against detuning `δ = ω − ω_gr`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub delta_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn zeros(delta_grid: &[f64]) -> Self {
        Self { delta_grid: delta_grid.to_vec(), values: vec![0.0; delta_grid.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index and value of the global maximum.
    pub fn peak(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// Strict interior local maxima, highest first.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        let mut idx: Vec<usize> = (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
            .collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        idx
    }

    /// Index of the largest sample within `[lo, hi]`.
    pub fn argmax_in(&self, lo: f64, hi: f64) -> Option<usize> {
        (0..self.len())
            .filter(|&i| self.delta_grid[i] >= lo && self.delta_grid[i] <= hi)
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    /// Half width at half maximum of the peak at sample `i`, measured from
    /// linearly interpolated half-maximum crossings on both sides.
    pub fn half_width(&self, i: usize) -> Option<f64> {
        let half = 0.5 * self.values[i];
        let (d, v) = (&self.delta_grid, &self.values);
        let interp = |a: usize, b: usize| d[a] + (half - v[a]) * (d[b] - d[a]) / (v[b] - v[a]);
        let right = (i..v.len() - 1).find(|&k| v[k + 1] < half).map(|k| interp(k, k + 1))?;
        let left = (1..=i).rev().find(|&k| v[k - 1] < half).map(|k| interp(k, k - 1))?;
        Some(0.5 * (right - left))
    }

    /// Largest pointwise |self − other|.
    pub fn max_abs_diff(&self, other: &Spectrum) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Spectrum {
        Spectrum { delta_grid: self.delta_grid.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.delta_grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(d, v)| 0.5 * (d[1] - d[0]) * (v[0] + v[1]))
            .sum()
    }
}

impl std::ops::Add<&Spectrum> for Spectrum {
    type Output = Spectrum;

    fn add(mut self, rhs: &Spectrum) -> Spectrum {
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a += b;
        }
        self
    }
}

/// `n` points spanning `[-half_range, half_range]`.
pub fn symmetric_grid(half_range: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -half_range + 2.0 * half_range * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    /// Largest allowed |C(τ_max)| / max|C|.
    pub cutoff_fraction: f64,
    /// Transform `C(τ) − C(∞)` instead of `C(τ)` (drops the elastic line).
    pub subtract_stationary: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { cutoff_fraction: 1e-3, subtract_stationary: false }
    }
}

/// `∫_0^h (c0 + (c1 − c0) u/h) e^{−iδu} du`, exact for the linear interpolant.
fn filon_segment(c0: C64, c1: C64, h: f64, delta: f64) -> C64 {
    let theta = delta * h;
    let (i0, i1) = if theta.abs() < 1e-3 {
        let t2 = theta * theta;
        (
            C64::new(1.0 - t2 / 6.0, -theta / 2.0 + theta * t2 / 24.0) * h,
            C64::new(0.5 - t2 / 8.0, -theta / 3.0 + theta * t2 / 30.0) * (h * h),
        )
    } else {
        let e = C64::from_polar(1.0, -theta);
        let i = C64::new(0.0, 1.0);
        ((C64::new(1.0, 0.0) - e) / (i * delta), i * h * e / delta + (e - 1.0) / (delta * delta))
    };
    c0 * i0 + (c1 - c0) * (i1 / h)
}

/// `prefactor · Re ∫_0^{τ_max} C(τ) e^{−iδτ} dτ`, integrating the piecewise
/// linear interpolant of the samples exactly.
pub fn spectrum_quadrature(
    c: &CorrelationFunction,
    prefactor: f64,
    delta_grid: &[f64],
    opts: &QuadratureOptions,
) -> Result<Spectrum, LinsysError> {
    let samples: Vec<C64> = if opts.subtract_stationary { c.fluctuating() } else { c.values.clone() };
    let peak = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(Spectrum::zeros(delta_grid));
    }
    let residual = samples.last().map_or(0.0, |z| z.norm()) / peak;
    if residual > opts.cutoff_fraction {
        return Err(LinsysError::InsufficientDecay { residual_fraction: residual });
    }
    let tau = &c.tau_grid;
    let values = delta_grid
        .par_iter()
        .map(|&delta| {
            let total: C64 = (0..tau.len() - 1)
                .map(|k| {
                    let h = tau[k + 1] - tau[k];
                    C64::from_polar(1.0, -delta * tau[k]) * filon_segment(samples[k], samples[k + 1], h, delta)
                })
                .sum();
            prefactor * total.re
        })
        .collect();
    Ok(Spectrum { delta_grid: delta_grid.to_vec(), values })
}

#[derive(Clone, Copy, Debug)]
pub struct ResolventOptions {
    /// Largest allowed stationary component relative to max|seed|.
    pub decay_tolerance: f64,
    /// Remove the stationary component instead of rejecting it.
    pub subtract_stationary: bool,
    /// Reject `(iδ − M)` with a 1-norm condition estimate above this.
    pub max_condition: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self { decay_tolerance: 1e-3, subtract_stationary: false, max_condition: 1e12 }
    }
}

/// `prefactor · Re[e_Bᵀ (iδ − M)⁻¹ y(0)]` with `y(0)` the regression seed of `A`.
pub fn spectrum_resolvent(
    gen: &Generator,
    a: &Label,
    b: &Label,
    state: &Snapshot,
    prefactor: f64,
    delta_grid: &[f64],
    opts: &ResolventOptions,
) -> Result<Spectrum, LinsysError> {
    let seed = seed_regression(gen, a, &state.values)?;
    let ib = gen.basis().index_of(b)?;
    resolvent_from_seed(gen, &seed, ib, prefactor, delta_grid, opts)
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Resolvent spectrum for an arbitrary seed vector.
pub fn resolvent_from_seed(
    gen: &Generator,
    seed: &DVector<C64>,
    observed: usize,
    prefactor: f64,
    delta_grid: &[f64],
    opts: &ResolventOptions,
) -> Result<Spectrum, LinsysError> {
    let Some(problem) = reduce(gen, seed, observed)? else {
        return Ok(Spectrum::zeros(delta_grid));
    };
    let m = problem.generator.matrix();
    let n = m.nrows();
    let identity = DMatrix::<C64>::identity(n, n);
    let (shift, rhs) = match stationary_projector(m)? {
        Some(p0) => {
            let stationary = (p0.row(problem.observed) * &problem.seed)[(0, 0)];
            let scale = problem.seed.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if !opts.subtract_stationary && stationary.norm() > opts.decay_tolerance * scale {
                return Err(LinsysError::NonDecaying { residual_fraction: stationary.norm() / scale });
            }
            // on range(1 − P0) the shifted matrix acts as iδ − M and is invertible at δ = 0
            let rhs = (&identity - &p0) * &problem.seed;
            (p0, rhs)
        }
        None => (DMatrix::zeros(n, n), problem.seed.clone()),
    };
    let base = shift - m;
    let values = delta_grid
        .par_iter()
        .map(|&delta| {
            let k = &base + &identity * C64::new(0.0, delta);
            let inv = k.clone().lu().try_inverse().ok_or(LinsysError::NearSingular { delta, condition: f64::INFINITY })?;
            let condition = one_norm(&k) * one_norm(&inv);
            if !condition.is_finite() || condition > opts.max_condition {
                return Err(LinsysError::NearSingular { delta, condition });
            }
            Ok(prefactor * (inv.row(problem.observed) * &rhs)[(0, 0)].re)
        })
        .collect::<Result<Vec<f64>, LinsysError>>()?;
    Ok(Spectrum { delta_grid: delta_grid.to_vec(), values })
}

/// Which route turns a regression seed into a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Integrate `C(τ)` on a τ-grid and transform by quadrature.
    #[default]
    Quadrature,
    /// Evaluate the Laplace transform through `(iδ − M)⁻¹`.
    Resolvent,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SpectrumOptions {
    pub method: SpectrumMethod,
    pub integrator: super::IntegratorOptions,
    pub tau: super::TauGridOptions,
    pub quadrature: QuadratureOptions,
    pub resolvent: ResolventOptions,
}

impl SpectrumOptions {
    pub fn with_method(method: SpectrumMethod) -> Self {
        Self { method, ..Default::default() }
    }

    /// Drop the elastic (stationary) part on both routes.
    pub fn subtracting_stationary(mut self) -> Self {
        self.quadrature.subtract_stationary = true;
        self.resolvent.subtract_stationary = true;
        self
    }
}

/// Spectrum of `⟨A(t) B(t+τ)⟩` given the regression seed of `A` and the index of `B`.
pub fn regression_spectrum(
    gen: &Generator,
    seed: &DVector<C64>,
    observed: usize,
    t_anchor: f64,
    prefactor: f64,
    delta_grid: &[f64],
    opts: &SpectrumOptions,
) -> Result<Spectrum, LinsysError> {
    match opts.method {
        SpectrumMethod::Resolvent => resolvent_from_seed(gen, seed, observed, prefactor, delta_grid, &opts.resolvent),
        SpectrumMethod::Quadrature => {
            let Some(problem) = reduce(gen, seed, observed)? else {
                return Ok(Spectrum::zeros(delta_grid));
            };
            let tau_grid = super::suggest_tau_grid(&problem, &opts.tau)?;
            let corr = super::evolve_seed(gen, seed, observed, t_anchor, &tau_grid, &opts.integrator)?;
            spectrum_quadrature(&corr, prefactor, delta_grid, &opts.quadrature)
        }
    }
}
