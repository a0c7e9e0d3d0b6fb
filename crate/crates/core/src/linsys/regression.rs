//! Two-time correlations by the quantum regression theorem.
//!
//! For `⟨A(t) B(t+τ)⟩` the vector `y_k(τ) = ⟨A(t) σ_k(t+τ)⟩` obeys the same
//! linear equations as the one-time expectations, seeded at `τ = 0` by the
//! equal-time products `⟨A σ_k⟩(t)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::integrate::{integrate, IntegratorOptions, Snapshot};
use super::{Generator, Label, LinsysError, OperatorBasis, C64};

/// Sampled `C(τ) = ⟨A(t) B(t+τ)⟩`.
#[derive(Clone, Debug)]
pub struct CorrelationFunction {
    pub tau_grid: Vec<f64>,
    pub values: Vec<C64>,
    /// Absolute time `t` at which the regression was seeded.
    pub t_anchor: f64,
    /// `lim τ→∞ C(τ)`; non-zero only when the generator has a stationary
    /// mode that both the seed and the observed label touch.
    pub stationary: C64,
}

impl CorrelationFunction {
    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `C(τ) − C(∞)`.
    pub fn fluctuating(&self) -> Vec<C64> {
        self.values.iter().map(|&z| z - self.stationary).collect()
    }
}

fn check_len(gen: &Generator, state: &DVector<C64>) -> Result<(), LinsysError> {
    if state.len() != gen.dim() {
        return Err(LinsysError::DimensionMismatch { expected: gen.dim(), found: state.len() });
    }
    Ok(())
}

/// `y_k = ⟨A σ_k⟩` from one-time expectations.
pub fn seed_regression(gen: &Generator, a: &Label, state: &DVector<C64>) -> Result<DVector<C64>, LinsysError> {
    check_len(gen, state)?;
    let basis = gen.basis();
    let ia = basis.index_of(a)?;
    Ok(DVector::from_fn(gen.dim(), |k, _| {
        basis.product(ia, k).map_or(C64::new(0.0, 0.0), |p| state[p])
    }))
}

/// `y_k = ⟨A σ_k B⟩` from one-time expectations, for normally ordered
/// three-operator correlations `⟨A(t) X(t+τ) B(t)⟩`.
pub fn seed_sandwich(
    gen: &Generator,
    a: &Label,
    b: &Label,
    state: &DVector<C64>,
) -> Result<DVector<C64>, LinsysError> {
    check_len(gen, state)?;
    let basis = gen.basis();
    let ia = basis.index_of(a)?;
    let ib = basis.index_of(b)?;
    Ok(DVector::from_fn(gen.dim(), |k, _| {
        basis
            .product(ia, k)
            .and_then(|p| basis.product(p, ib))
            .map_or(C64::new(0.0, 0.0), |p| state[p])
    }))
}

/// The part of a regression problem that can influence the observed label:
/// labels reachable from the seed's support that the observed label depends on.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub generator: Generator,
    pub seed: DVector<C64>,
    pub observed: usize,
}

fn reach(m: &DMatrix<C64>, start: impl Iterator<Item = usize>, forward: bool) -> Vec<bool> {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = start.collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(v) = queue.pop_front() {
        for u in 0..n {
            let entry = if forward { m[(u, v)] } else { m[(v, u)] };
            let coupled = entry.re != 0.0 || entry.im != 0.0;
            if coupled && !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Restricts `(gen, seed)` to the labels on some path from the seed support
/// to `observed`. Returns `None` when no such path exists (the observed
/// component is identically zero).
pub fn reduce(gen: &Generator, seed: &DVector<C64>, observed: usize) -> Result<Option<ReducedProblem>, LinsysError> {
    check_len(gen, seed)?;
    let m = gen.matrix();
    let fwd = reach(m, (0..gen.dim()).filter(|&k| seed[k].norm() > 0.0), true);
    if !fwd[observed] {
        return Ok(None);
    }
    let bwd = reach(m, std::iter::once(observed), false);
    let keep: Vec<usize> = (0..gen.dim()).filter(|&k| fwd[k] && bwd[k]).collect();
    let basis = gen.basis();
    let labels: Vec<Label> = keep.iter().map(|&k| basis.label(k).clone()).collect();
    let sub_basis = OperatorBasis::new(basis.states().to_vec(), labels)?;
    let generator = Generator::new(sub_basis, gen.submatrix(&keep))?;
    let seed = DVector::from_iterator(keep.len(), keep.iter().map(|&k| seed[k]));
    let observed = keep.iter().position(|&k| k == observed).expect("observed label is kept");
    Ok(Some(ReducedProblem { generator, seed, observed }))
}

/// Spectral projector onto the kernel of `m`, if the kernel is non-trivial.
pub(crate) fn stationary_projector(m: &DMatrix<C64>) -> Result<Option<DMatrix<C64>>, LinsysError> {
    let n = m.nrows();
    if n == 0 {
        return Ok(None);
    }
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] < 1e-10 * s_max).collect();
    if null.is_empty() {
        return Ok(None);
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᴴ");
    // right kernel: rows of Vᴴ (conjugated); left kernel: columns of U
    let right = DMatrix::from_fn(n, null.len(), |r, c| v_t[(null[c], r)].conj());
    let left_h = DMatrix::from_fn(null.len(), n, |r, c| u[(c, null[r])].conj());
    let gram = &left_h * &right;
    let gram_inv = gram
        .try_inverse()
        .ok_or(LinsysError::NearSingular { delta: 0.0, condition: f64::INFINITY })?;
    Ok(Some(right * gram_inv * left_h))
}

/// `lim τ→∞` of the observed component, from the kernel projector.
pub fn stationary_value(problem: &ReducedProblem) -> Result<C64, LinsysError> {
    Ok(match stationary_projector(problem.generator.matrix())? {
        Some(p0) => (p0.row(problem.observed) * &problem.seed)[(0, 0)],
        None => C64::new(0.0, 0.0),
    })
}

/// Controls the automatically chosen delay grid.
#[derive(Clone, Copy, Debug)]
pub struct TauGridOptions {
    /// τ_max in units of the slowest non-stationary decay time.
    pub horizon: f64,
    /// Samples per period of the fastest oscillation.
    pub points_per_period: f64,
    /// Samples per decay time of the fastest decaying mode.
    pub points_per_decay: f64,
    pub max_points: usize,
}

impl Default for TauGridOptions {
    fn default() -> Self {
        Self { horizon: 12.0, points_per_period: 40.0, points_per_decay: 20.0, max_points: 4_000_000 }
    }
}

/// Uniform τ-grid resolving every mode of the reduced regression generator.
pub fn suggest_tau_grid(problem: &ReducedProblem, opts: &TauGridOptions) -> Result<Vec<f64>, LinsysError> {
    let m = problem.generator.matrix();
    let eig = m
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| LinsysError::InvalidGrid("eigenvalues unavailable".into()))?;
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut slowest = f64::INFINITY;
    let mut fastest = 0.0f64;
    let mut max_freq = 0.0f64;
    for lam in eig.iter() {
        if lam.norm() <= 1e-10 * scale {
            continue;
        }
        let rate = -lam.re;
        if rate <= 1e-12 * scale {
            return Err(LinsysError::NonDecaying { residual_fraction: 1.0 });
        }
        slowest = slowest.min(rate);
        fastest = fastest.max(rate);
        max_freq = max_freq.max(lam.im.abs());
    }
    if !slowest.is_finite() {
        // only stationary modes: nothing to resolve beyond a unit window
        return Ok(vec![0.0, 1.0]);
    }
    let tau_max = opts.horizon / slowest;
    let mut dtau = 1.0 / (opts.points_per_decay * fastest);
    if max_freq > 0.0 {
        dtau = dtau.min(2.0 * std::f64::consts::PI / (opts.points_per_period * max_freq));
    }
    let n = (tau_max / dtau).ceil() as usize + 1;
    if n > opts.max_points {
        return Err(LinsysError::InvalidGrid(format!(
            "τ-grid needs {n} points (τ_max = {tau_max:.3e}, dτ = {dtau:.3e}); limit is {}",
            opts.max_points
        )));
    }
    Ok(super::integrate::uniform_grid(tau_max, n.max(2)))
}

/// Evolves an arbitrary regression seed and reads off one label.
pub fn evolve_seed(
    gen: &Generator,
    seed: &DVector<C64>,
    observed: usize,
    t_anchor: f64,
    tau_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<CorrelationFunction, LinsysError> {
    super::integrate::validate_grid(tau_grid)?;
    let Some(problem) = reduce(gen, seed, observed)? else {
        return Ok(CorrelationFunction {
            tau_grid: tau_grid.to_vec(),
            values: vec![C64::new(0.0, 0.0); tau_grid.len()],
            t_anchor,
            stationary: C64::new(0.0, 0.0),
        });
    };
    let traj = integrate(&problem.generator, &problem.seed, tau_grid, opts)?;
    let stationary = stationary_value(&problem)?;
    Ok(CorrelationFunction {
        tau_grid: tau_grid.to_vec(),
        values: traj.component(problem.observed),
        t_anchor,
        stationary,
    })
}

/// `C(τ) = ⟨A(t) B(t+τ)⟩` seeded from `state`.
///
/// Only the labels connecting the seed to `B` are integrated; the result is
/// identical to evolving the full generator.
pub fn correlation(
    gen: &Generator,
    a: &Label,
    b: &Label,
    state: &Snapshot,
    tau_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<CorrelationFunction, LinsysError> {
    let seed = seed_regression(gen, a, &state.values)?;
    let ib = gen.basis().index_of(b)?;
    evolve_seed(gen, &seed, ib, state.t, tau_grid, opts)
}
