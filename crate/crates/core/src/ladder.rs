//! Collective model of N fully blockaded Λ atoms.
//!
//! Rung `j` (1 ≤ j ≤ N) holds the l-summed operators over the manifold with
//! `j` atoms left in `|g⟩`: ground `G_j`, single-excitation Dicke state
//! `W_j`, and their coherences. Decay `W_{j+1} → G_j` walks the ladder down
//! to the dark sink `G_0 = |d,…,d⟩`. The generator has dimension `4N + 1`;
//! no state of the `3^N`-dimensional product space is ever enumerated.

use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, ModelError, Result};
use crate::linsys::{
    integrate, regression_spectrum, seed_regression, seed_sandwich, evolve_seed, Generator, IntegratorOptions,
    Label, OperatorBasis, Spectrum, SpectrumOptions, C64,
};
use crate::single_atom::{excited_fraction, RateParams, QUASI_STEADY_DECAY_TIMES};

/// Extra decay through the unsymmetrical (dark) collective states,
/// folded into the rung rates as `D_rg^j` and `D_rd^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlippingModel {
    #[default]
    None,
    /// `D^j = (j − 1) c`
    Proportional { c_rg: f64, c_rd: f64 },
    /// Explicit `D^j` for `j = 1..=N`; `D^1` must be zero.
    Table { d_rg: Vec<f64>, d_rd: Vec<f64> },
}

impl FlippingModel {
    pub fn d_rg(&self, j: usize) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Proportional { c_rg, .. } => (j - 1) as f64 * c_rg,
            Self::Table { d_rg, .. } => d_rg[j - 1],
        }
    }

    pub fn d_rd(&self, j: usize) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Proportional { c_rd, .. } => (j - 1) as f64 * c_rd,
            Self::Table { d_rd, .. } => d_rd[j - 1],
        }
    }

    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::Proportional { c_rg, c_rd } => {
                require_non_negative("flipping c_rg", *c_rg)?;
                require_non_negative("flipping c_rd", *c_rd)
            }
            Self::Table { d_rg, d_rd } => {
                if d_rg.len() != n_atoms || d_rd.len() != n_atoms {
                    return Err(ModelError::InvalidParameter(format!(
                        "flipping table needs {n_atoms} entries per channel, found {} and {}",
                        d_rg.len(),
                        d_rd.len()
                    )));
                }
                for &d in d_rg.iter().chain(d_rd) {
                    require_non_negative("flipping table entry", d)?;
                }
                if d_rg[0] != 0.0 || d_rd[0] != 0.0 {
                    return Err(ModelError::InvalidParameter(
                        "D^1 must vanish: a single ground atom has no unsymmetrical partners".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Effective rates of rung `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RungRates {
    pub j: usize,
    /// `√j Ω`
    pub omega: f64,
    /// `γ_rg + jγ + D_rg^j`
    pub gamma_rg: f64,
    /// `γ_rd + D_rd^j`
    pub gamma_rd: f64,
    /// `Γ_j = γ_rg^j + γ_rd^j`
    pub big_gamma: f64,
}

impl RungRates {
    /// Quasi-steady `⟨W_j W_j⟩ / p_j`.
    pub fn excited_fraction(&self) -> f64 {
        excited_fraction(self.omega, self.big_gamma)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveRates {
    rungs: Vec<RungRates>,
}

impl CollectiveRates {
    /// Rates of rung `j`, `1 ≤ j ≤ N`.
    pub fn rung(&self, j: usize) -> &RungRates {
        &self.rungs[j - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &RungRates> {
        self.rungs.iter()
    }

    pub fn min_total_decay(&self) -> f64 {
        self.rungs.iter().map(|r| r.big_gamma).fold(f64::INFINITY, f64::min)
    }

    pub fn max_total_decay(&self) -> f64 {
        self.rungs.iter().map(|r| r.big_gamma).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub n_atoms: usize,
    pub rates: RateParams,
    #[serde(default)]
    pub flipping: FlippingModel,
}

impl LadderParams {
    pub fn new(n_atoms: usize, rates: RateParams, flipping: FlippingModel) -> Result<Self> {
        let p = Self { n_atoms, rates, flipping };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(ModelError::InvalidParameter("n_atoms must be at least 1".into()));
        }
        self.rates.validate()?;
        self.flipping.validate(self.n_atoms)
    }

    pub fn collective_rates(&self) -> CollectiveRates {
        let r = &self.rates;
        let rungs = (1..=self.n_atoms)
            .map(|j| {
                let gamma_rg = r.gamma_rg + j as f64 * r.gamma + self.flipping.d_rg(j);
                let gamma_rd = r.gamma_rd + self.flipping.d_rd(j);
                RungRates { j, omega: (j as f64).sqrt() * r.omega, gamma_rg, gamma_rd, big_gamma: gamma_rg + gamma_rd }
            })
            .collect();
        CollectiveRates { rungs }
    }

    /// `(j, √j Ω / Γ_j)` per rung.
    pub fn strong_field_ratios(&self) -> Vec<(usize, f64)> {
        self.collective_rates().iter().map(|r| (r.j, r.omega / r.big_gamma)).collect()
    }

    /// Default quasi-steady seeding time `8 / min_j Γ_j`.
    pub fn default_seed_time(&self) -> f64 {
        QUASI_STEADY_DECAY_TIMES / self.collective_rates().min_total_decay()
    }

    pub fn dim(&self) -> usize {
        generator_dim(self.n_atoms)
    }
}

/// `N_s[j] = N! / ((N − j)! j!)`, the number of ground states with `j` atoms in `|g⟩`.
pub fn multiplicity(n: usize, j: usize) -> Result<u128> {
    if j > n {
        return Err(ModelError::OutOfRange { what: "rung index", value: j as f64, range: format!("[0, {n}]") });
    }
    let k = j.min(n - j) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc·(n−i) is divisible by (i+1)
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| ModelError::InvalidParameter("binomial coefficient overflows u128".into()))?
            / (i + 1);
    }
    Ok(acc)
}

/// `N_d[j] = j`: decay channels from one `W_j` into the `G_{j−1}` manifold.
pub fn decay_paths(j: usize) -> usize {
    j
}

pub fn generator_dim(n_atoms: usize) -> usize {
    4 * n_atoms + 1
}

/// Label indices of rung `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RungIndex {
    pub gg: usize,
    pub ww: usize,
    pub gw: usize,
    pub wg: usize,
}

pub fn rung_index(j: usize) -> RungIndex {
    let b = 4 * (j - 1);
    RungIndex { gg: b, ww: b + 1, gw: b + 2, wg: b + 3 }
}

pub fn sink_index(n_atoms: usize) -> usize {
    4 * n_atoms
}

pub fn ground_label(j: usize) -> String {
    format!("G{j}")
}

pub fn excited_label(j: usize) -> String {
    format!("W{j}")
}

pub fn basis(n_atoms: usize) -> OperatorBasis {
    let mut states = vec![ground_label(0)];
    let mut labels = Vec::with_capacity(generator_dim(n_atoms));
    for j in 1..=n_atoms {
        let (g, w) = (ground_label(j), excited_label(j));
        labels.push(Label::new(&g, &g));
        labels.push(Label::new(&w, &w));
        labels.push(Label::new(&g, &w));
        labels.push(Label::new(&w, &g));
        states.push(g);
        states.push(w);
    }
    labels.push(Label::new(ground_label(0), ground_label(0)));
    OperatorBasis::new(states, labels).expect("ladder labels are unique")
}

/// Collective Heisenberg equations over `{G_jG_j, W_jW_j, G_jW_j, W_jG_j}_j ∪ {G_0G_0}`.
///
/// Rung `j` is fed by `γ_rd^{j+1} ⟨W_{j+1}W_{j+1}⟩`; the sink by `γ_rd^1 ⟨W_1W_1⟩`.
pub fn ladder_generator(p: &LadderParams) -> Generator {
    let rates = p.collective_rates();
    let mut b = Generator::builder(basis(p.n_atoms));
    for r in rates.iter() {
        let i = rung_index(r.j);
        let half_rabi = C64::new(0.0, 0.5 * r.omega);
        b.add(i.gg, i.gw, half_rabi).add(i.gg, i.wg, -half_rabi).add_real(i.gg, i.ww, r.gamma_rg);
        b.add(i.ww, i.wg, half_rabi).add(i.ww, i.gw, -half_rabi).add_real(i.ww, i.ww, -r.big_gamma);
        b.add(i.gw, i.gg, half_rabi).add(i.gw, i.ww, -half_rabi).add_real(i.gw, i.gw, -0.5 * r.big_gamma);
        b.add(i.wg, i.gg, -half_rabi).add(i.wg, i.ww, half_rabi).add_real(i.wg, i.wg, -0.5 * r.big_gamma);
        let target = if r.j == 1 { sink_index(p.n_atoms) } else { rung_index(r.j - 1).gg };
        b.add_real(target, i.ww, r.gamma_rd);
    }
    b.build().expect("finite rates")
}

/// One-time expectations of the ladder operators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderState {
    /// `⟨σ̃_{G_jG_j}⟩`, index `j − 1`.
    pub g_pop: Vec<f64>,
    /// `⟨σ̃_{W_jW_j}⟩`, index `j − 1`.
    pub w_pop: Vec<f64>,
    /// `⟨σ̃_{G_jW_j}⟩`, index `j − 1`.
    pub coh: Vec<C64>,
    /// `⟨σ_{G_0G_0}⟩`
    pub g0_pop: f64,
}

impl LadderState {
    /// All atoms in `|g⟩`.
    pub fn ground(n_atoms: usize) -> Self {
        let mut s = Self::dark(n_atoms);
        s.g0_pop = 0.0;
        s.g_pop[n_atoms - 1] = 1.0;
        s
    }

    /// All atoms pooled in `|d⟩`.
    pub fn dark(n_atoms: usize) -> Self {
        Self {
            g_pop: vec![0.0; n_atoms],
            w_pop: vec![0.0; n_atoms],
            coh: vec![C64::new(0.0, 0.0); n_atoms],
            g0_pop: 1.0,
        }
    }

    /// Incoherent mixture of rung ground states with populations `p_0..=p_N`.
    pub fn diagonal(pj: &[f64]) -> Self {
        let n = pj.len() - 1;
        let mut s = Self::dark(n);
        s.g0_pop = pj[0];
        s.g_pop.copy_from_slice(&pj[1..]);
        s
    }

    pub fn n_atoms(&self) -> usize {
        self.g_pop.len()
    }

    pub fn to_vector(&self) -> DVector<C64> {
        let n = self.n_atoms();
        let mut y = DVector::zeros(generator_dim(n));
        for j in 1..=n {
            let i = rung_index(j);
            y[i.gg] = C64::new(self.g_pop[j - 1], 0.0);
            y[i.ww] = C64::new(self.w_pop[j - 1], 0.0);
            y[i.gw] = self.coh[j - 1];
            y[i.wg] = self.coh[j - 1].conj();
        }
        y[sink_index(n)] = C64::new(self.g0_pop, 0.0);
        y
    }

    /// Reads a state vector; populations keep only their real parts.
    pub fn from_vector(y: &DVector<C64>) -> Self {
        let n = (y.len() - 1) / 4;
        let mut s = Self::dark(n);
        for j in 1..=n {
            let i = rung_index(j);
            s.g_pop[j - 1] = y[i.gg].re;
            s.w_pop[j - 1] = y[i.ww].re;
            s.coh[j - 1] = y[i.gw];
        }
        s.g0_pop = y[sink_index(n)].re;
        s
    }

    pub fn trace(&self) -> f64 {
        self.g_pop.iter().sum::<f64>() + self.w_pop.iter().sum::<f64>() + self.g0_pop
    }

    /// Rydberg fraction `(1/N) Σ_j ⟨σ̃_{W_jW_j}⟩`.
    pub fn rydberg_fraction(&self) -> f64 {
        self.w_pop.iter().sum::<f64>() / self.n_atoms() as f64
    }
}

/// `p_j = ⟨σ̃_{G_jG_j}⟩ + ⟨σ̃_{W_jW_j}⟩` for `j ≥ 1`, `p_0 = ⟨σ_{G_0G_0}⟩`.
pub fn pj_numeric(state: &LadderState) -> Vec<f64> {
    std::iter::once(state.g0_pop)
        .chain(state.g_pop.iter().zip(&state.w_pop).map(|(g, w)| g + w))
        .collect()
}

#[derive(Clone, Debug)]
pub struct LadderTrajectory {
    pub t_grid: Vec<f64>,
    pub states: Vec<LadderState>,
}

impl LadderTrajectory {
    /// `p_j(t)` rows, one per time sample.
    pub fn pj(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(pj_numeric).collect()
    }
}

/// Integrates the ladder from `initial` (default: all atoms in `|g⟩`).
pub fn evolve_ladder(
    p: &LadderParams,
    t_grid: &[f64],
    initial: Option<&LadderState>,
    opts: &IntegratorOptions,
) -> Result<LadderTrajectory> {
    let start = initial.cloned().unwrap_or_else(|| LadderState::ground(p.n_atoms));
    if start.n_atoms() != p.n_atoms {
        return Err(ModelError::InvalidParameter(format!(
            "initial state has {} rungs, parameters have {}",
            start.n_atoms(),
            p.n_atoms
        )));
    }
    let traj = integrate(&ladder_generator(p), &start.to_vector(), t_grid, opts)?;
    Ok(LadderTrajectory { t_grid: traj.t_grid, states: traj.values.iter().map(LadderState::from_vector).collect() })
}

/// Ladder state at time `t` from the all-ground start.
pub fn state_at(p: &LadderParams, t: f64, opts: &IntegratorOptions) -> Result<LadderState> {
    let grid = if t > 0.0 { vec![0.0, t] } else { vec![0.0] };
    Ok(evolve_ladder(p, &grid, None, opts)?.states.pop().expect("non-empty"))
}

fn warn_if_transient(p: &LadderParams, t: f64) {
    let threshold = p.default_seed_time();
    if t < threshold {
        warn!("seed time t = {t} is below 8/min Γ_j = {threshold:.4}; quasi-steady seeding is approximate");
    }
}

/// Total and per-rung scattered-field spectra.
#[derive(Clone, Debug)]
pub struct EnsembleSpectrum {
    pub total: Spectrum,
    /// `γ j Re ∫ ⟨σ̃_{G_jW_j}(t) σ̃_{W_jG_j}(t+τ)⟩ e^{−iδτ} dτ`, index `j − 1`.
    pub rungs: Vec<Spectrum>,
}

/// Quasi-steady spectrum of the scattered field, summing the diagonal rung
/// correlations of the full ladder seeded at `t`.
pub fn ensemble_spectrum_numeric(
    p: &LadderParams,
    t: f64,
    delta_grid: &[f64],
    opts: &SpectrumOptions,
) -> Result<EnsembleSpectrum> {
    warn_if_transient(p, t);
    let gen = ladder_generator(p);
    let state = state_at(p, t, &opts.integrator)?.to_vector();
    let rungs = (1..=p.n_atoms)
        .into_par_iter()
        .map(|j| {
            let a = Label::new(ground_label(j), excited_label(j));
            let seed = seed_regression(&gen, &a, &state)?;
            let prefactor = p.rates.gamma * j as f64;
            Ok(regression_spectrum(&gen, &seed, rung_index(j).wg, t, prefactor, delta_grid, opts)?)
        })
        .collect::<Result<Vec<Spectrum>>>()?;
    let total = rungs.iter().fold(Spectrum::zeros(delta_grid), |acc, s| acc + s);
    Ok(EnsembleSpectrum { total, rungs })
}

/// Equal-time `⟨σ̃_{G_{j1}W_{j1}} σ̃_{W_{j2}G_{j2}}⟩` from the product rule.
pub fn rung_pair_seed(state: &LadderState, j1: usize, j2: usize) -> Result<C64> {
    let n = state.n_atoms();
    let gen = Generator::new(basis(n), nalgebra::DMatrix::zeros(generator_dim(n), generator_dim(n)))?;
    let seed = seed_regression(&gen, &Label::new(ground_label(j1), excited_label(j1)), &state.to_vector())?;
    Ok(seed[rung_index(j2).wg])
}

/// Second-order correlation of the scattered field.
#[derive(Clone, Debug)]
pub struct SecondOrderCorrelation {
    pub tau_grid: Vec<f64>,
    /// `Σ_j γ² j² ⟨σ̃_{G_jW_j}(t1) σ̃_{G_jW_j}(t1+τ) σ̃_{W_jG_j}(t1+τ) σ̃_{W_jG_j}(t1)⟩`
    pub unnormalized: Vec<f64>,
    /// Intensity `I = Σ_j γ j ⟨σ̃_{W_jW_j}⟩` at `t1 + τ`.
    pub intensity: Vec<f64>,
    /// `G²(τ) / (I(t1) I(t1+τ))`
    pub normalized: Vec<f64>,
}

/// Rung-diagonal second-order correlation seeded at `t1`.
///
/// Per rung, `X(t1+τ) = σ̃_{G_jW_j} σ̃_{W_jG_j} = σ̃_{G_jG_j}` is regressed from
/// the seed `⟨σ̃_{G_jW_j} σ_k σ̃_{W_jG_j}⟩(t1)`.
pub fn g2_numeric(
    p: &LadderParams,
    t1: f64,
    tau_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<SecondOrderCorrelation> {
    warn_if_transient(p, t1);
    let gen = ladder_generator(p);
    let state = state_at(p, t1, opts)?;
    let y = state.to_vector();
    let gamma = p.rates.gamma;
    let per_rung = (1..=p.n_atoms)
        .into_par_iter()
        .map(|j| {
            let outer = Label::new(ground_label(j), excited_label(j));
            let inner = Label::new(excited_label(j), ground_label(j));
            let seed = seed_sandwich(&gen, &outer, &inner, &y)?;
            let corr = evolve_seed(&gen, &seed, rung_index(j).gg, t1, tau_grid, opts)?;
            let weight = (gamma * j as f64).powi(2);
            Ok(corr.values.iter().map(|z| weight * z.re).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let unnormalized: Vec<f64> = (0..tau_grid.len()).map(|k| per_rung.iter().map(|r| r[k]).sum()).collect();

    let later = integrate(&gen, &y, tau_grid, opts)?;
    let intensity: Vec<f64> = later
        .values
        .iter()
        .map(|v| (1..=p.n_atoms).map(|j| gamma * j as f64 * v[rung_index(j).ww].re).sum())
        .collect();
    let i0 = intensity[0];
    let normalized = unnormalized.iter().zip(&intensity).map(|(g, i)| g / (i0 * i)).collect();
    Ok(SecondOrderCorrelation { tau_grid: tau_grid.to_vec(), unnormalized, intensity, normalized })
}
