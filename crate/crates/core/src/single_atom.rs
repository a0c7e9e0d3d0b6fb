//! A single Λ-type atom driven on `|g⟩ ↔ |r⟩`, with `|r⟩` decaying to both
//! `|g⟩` and the pooling state `|d⟩`.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, ModelError, Result};
use crate::linsys::{
    integrate, regression_spectrum, seed_regression, Generator, Label, OperatorBasis, Spectrum, SpectrumOptions, C64,
};

/// Single-atom rates and drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Emission into the probe mode.
    pub gamma: f64,
    /// Direct `|r⟩ → |g⟩` decay.
    pub gamma_rg: f64,
    /// `|r⟩ → |d⟩` decay.
    pub gamma_rd: f64,
    /// Rabi frequency of the probe.
    pub omega: f64,
}

impl RateParams {
    pub fn new(gamma: f64, gamma_rg: f64, gamma_rd: f64, omega: f64) -> Result<Self> {
        let p = Self { gamma, gamma_rg, gamma_rd, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("gamma", self.gamma)?;
        require_non_negative("gamma_rg", self.gamma_rg)?;
        require_non_negative("gamma_rd", self.gamma_rd)?;
        require_non_negative("omega", self.omega)?;
        if self.total_decay() <= 0.0 {
            return Err(ModelError::InvalidParameter("total decay rate Γ must be positive".into()));
        }
        Ok(())
    }

    /// `Γ = γ + γ_rg + γ_rd`
    pub fn total_decay(&self) -> f64 {
        self.gamma + self.gamma_rg + self.gamma_rd
    }

    /// Strong-field excited fraction `Ω²/(Γ² + 2Ω²)`.
    pub fn excited_fraction(&self) -> f64 {
        excited_fraction(self.omega, self.total_decay())
    }

    pub fn regime(&self, thresholds: &RegimeThresholds) -> Regime {
        thresholds.classify(self.omega / self.total_decay())
    }
}

pub(crate) fn excited_fraction(omega: f64, big_gamma: f64) -> f64 {
    let o2 = omega * omega;
    o2 / (big_gamma * big_gamma + 2.0 * o2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    StrongField,
    WeakField,
    Intermediate,
}

/// Bounds on `Ω/Γ` separating the strong- and weak-field limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeThresholds {
    pub strong: f64,
    pub weak: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { strong: 10.0, weak: 0.1 }
    }
}

impl RegimeThresholds {
    pub fn classify(&self, ratio: f64) -> Regime {
        if ratio >= self.strong {
            Regime::StrongField
        } else if ratio <= self.weak {
            Regime::WeakField
        } else {
            Regime::Intermediate
        }
    }
}

/// Seeding time after which intra-subspace transients count as decayed.
pub const QUASI_STEADY_DECAY_TIMES: f64 = 8.0;

/// `Ω = 2√(fγ)` for an input photon rate `f`.
pub fn rabi_from_photon_rate(photon_rate: f64, gamma: f64) -> Result<f64> {
    require_non_negative("photon rate", photon_rate)?;
    require_non_negative("gamma", gamma)?;
    Ok(2.0 * (photon_rate * gamma).sqrt())
}

pub const GG: usize = 0;
pub const RR: usize = 1;
pub const GR: usize = 2;
pub const RG: usize = 3;
pub const DD: usize = 4;

pub fn basis() -> OperatorBasis {
    let labels = [("g", "g"), ("r", "r"), ("g", "r"), ("r", "g"), ("d", "d")]
        .into_iter()
        .map(|(a, b)| Label::new(a, b))
        .collect();
    OperatorBasis::new(vec!["g", "r", "d"], labels).expect("static basis")
}

/// Heisenberg equations for `{σ_gg, σ_rr, σ_gr, σ_rg, σ_dd}`.
///
/// The coherence `σ_gr` plays the role of the collective `σ̃_GW`, so this is
/// row for row the one-rung ladder with `γ_rg → γ + γ_rg`.
pub fn single_atom_generator(p: &RateParams) -> Generator {
    let half_rabi = C64::new(0.0, 0.5 * p.omega);
    let big_gamma = p.total_decay();
    let mut b = Generator::builder(basis());
    b.add(GG, GR, half_rabi).add(GG, RG, -half_rabi).add_real(GG, RR, p.gamma + p.gamma_rg);
    b.add(RR, RG, half_rabi).add(RR, GR, -half_rabi).add_real(RR, RR, -big_gamma);
    b.add(GR, GG, half_rabi).add(GR, RR, -half_rabi).add_real(GR, GR, -0.5 * big_gamma);
    b.add(RG, GG, -half_rabi).add(RG, RR, half_rabi).add_real(RG, RG, -0.5 * big_gamma);
    b.add_real(DD, RR, p.gamma_rd);
    b.build().expect("finite rates")
}

pub fn ground_state() -> DVector<C64> {
    let mut y = DVector::zeros(5);
    y[GG] = C64::new(1.0, 0.0);
    y
}

/// Three-Lorentzian strong-field lineshape `A[Ω, Γ](δ)` for an emitter with
/// probe-mode rate `gamma`, total decay `big_gamma` and pooling rate `gamma_rd`.
pub fn mollow_lineshape(gamma: f64, omega: f64, big_gamma: f64, gamma_rd: f64, delta: f64) -> f64 {
    let side = 3.0 * big_gamma - gamma_rd;
    let center = (big_gamma / 8.0) / (delta * delta + 0.25 * big_gamma * big_gamma);
    let sideband = |d: f64| (side / 8.0) / (4.0 * d * d + 0.25 * side * side);
    gamma * (center + sideband(delta - omega) + sideband(delta + omega))
}

fn warn_if_transient(t: f64, big_gamma: f64) {
    if t < QUASI_STEADY_DECAY_TIMES / big_gamma {
        warn!("seed time t = {t} is below {QUASI_STEADY_DECAY_TIMES}/Γ; quasi-steady formulas may be inaccurate");
    }
}

/// Strong-field quasi-steady spectrum `e^{−xγ_rd t} A[Ω, Γ](δ)`.
pub fn sfl_spectrum_analytic(p: &RateParams, t: f64, delta_grid: &[f64]) -> Spectrum {
    let big_gamma = p.total_decay();
    if p.regime(&RegimeThresholds::default()) != Regime::StrongField {
        warn!("Ω/Γ = {:.3} is outside the strong-field limit", p.omega / big_gamma);
    }
    warn_if_transient(t, big_gamma);
    let envelope = (-p.excited_fraction() * p.gamma_rd * t).exp();
    Spectrum {
        delta_grid: delta_grid.to_vec(),
        values: delta_grid
            .iter()
            .map(|&d| envelope * mollow_lineshape(p.gamma, p.omega, big_gamma, p.gamma_rd, d))
            .collect(),
    }
}

/// Weak-field single peak of half width `γ_rd Ω²/Γ²`.
pub fn wfl_spectrum_analytic(p: &RateParams, t: f64, delta_grid: &[f64]) -> Result<Spectrum> {
    let big_gamma = p.total_decay();
    if p.gamma_rd == 0.0 {
        return Err(ModelError::InvalidParameter(
            "weak-field peak has zero width when gamma_rd = 0".into(),
        ));
    }
    if p.regime(&RegimeThresholds::default()) != Regime::WeakField {
        warn!("Ω/Γ = {:.3} is outside the weak-field limit", p.omega / big_gamma);
    }
    warn_if_transient(t, big_gamma);
    let envelope = (-p.excited_fraction() * p.gamma_rd * t).exp();
    let ratio2 = (p.omega / big_gamma).powi(2);
    let width = p.gamma_rd * ratio2;
    let weight = p.gamma_rd * ratio2 * ratio2;
    Ok(Spectrum {
        delta_grid: delta_grid.to_vec(),
        values: delta_grid.iter().map(|&d| envelope * p.gamma * weight / (d * d + width * width)).collect(),
    })
}

/// One-time expectations at `t`, starting from `|g⟩`.
pub fn state_at(p: &RateParams, t: f64, opts: &crate::linsys::IntegratorOptions) -> Result<DVector<C64>> {
    let gen = single_atom_generator(p);
    let grid = if t > 0.0 { vec![0.0, t] } else { vec![0.0] };
    let traj = integrate(&gen, &ground_state(), &grid, opts)?;
    Ok(traj.values.last().expect("non-empty").clone())
}

/// `γ Re ∫ ⟨σ_rg(t) σ_gr(t+τ)⟩ e^{−iδτ} dτ` from the regression theorem,
/// seeded at `t` after starting in `|g⟩`.
pub fn spectrum_numeric(p: &RateParams, t: f64, delta_grid: &[f64], opts: &SpectrumOptions) -> Result<Spectrum> {
    warn_if_transient(t, p.total_decay());
    let gen = single_atom_generator(p);
    let state = state_at(p, t, &opts.integrator)?;
    let seed = seed_regression(&gen, &Label::new("r", "g"), &state)?;
    Ok(regression_spectrum(&gen, &seed, GR, t, p.gamma, delta_grid, opts)?)
}
