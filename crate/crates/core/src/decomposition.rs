//! Strong-field decomposition of the ladder into independent open two-level
//! rungs whose total populations `p_j` relax down the chain
//! `∂_t p_j = −(γ_rd^j p_j − γ_rd^{j+1} p_{j+1}) / 2`.

use log::warn;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{ModelError, Result};
use crate::ladder::LadderParams;
use crate::linsys::{integrate, Generator, IntegratorOptions, Label, OperatorBasis, Spectrum, C64};
use crate::single_atom::mollow_lineshape;

fn pop_label(j: usize) -> String {
    format!("p{j}")
}

/// Linear generator of the rung populations, labels `p_0..=p_N`.
///
/// `p_0` is carried as its own row so the summed population is conserved by
/// the matrix itself.
pub fn pj_generator(p: &LadderParams) -> Generator {
    let n = p.n_atoms;
    let states: Vec<String> = (0..=n).map(pop_label).collect();
    let labels = states.iter().map(|s| Label::new(s.clone(), s.clone())).collect();
    let mut b = Generator::builder(OperatorBasis::new(states, labels).expect("unique labels"));
    for r in p.collective_rates().iter() {
        b.add_real(r.j, r.j, -0.5 * r.gamma_rd);
        b.add_real(r.j - 1, r.j, 0.5 * r.gamma_rd);
    }
    b.build().expect("finite rates")
}

/// `⟨p_j⟩(t)` for `j = 0..=N` on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PjTrajectory {
    pub t_grid: Vec<f64>,
    /// One row per time sample, `p[i][j]`.
    pub p: Vec<Vec<f64>>,
}

impl PjTrajectory {
    pub fn n_atoms(&self) -> usize {
        self.p.first().map_or(0, |row| row.len() - 1)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.p.iter().map(|row| row[j]).collect()
    }

    /// `max_t |Σ_j p_j − 1|`
    pub fn max_sum_drift(&self) -> f64 {
        self.p.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_{t, j} |p_j − q_j|` over samples with `t ≥ t_from`.
    pub fn max_abs_diff(&self, other: &[Vec<f64>], t_from: f64) -> f64 {
        self.t_grid
            .iter()
            .zip(self.p.iter().zip(other))
            .filter(|(t, _)| **t >= t_from)
            .flat_map(|(_, (a, b))| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Integrates the rung-population chain from `p_N(0) = 1`.
pub fn evolve_pj(p: &LadderParams, t_grid: &[f64], opts: &IntegratorOptions) -> Result<PjTrajectory> {
    let gen = pj_generator(p);
    let mut y0 = nalgebra::DVector::zeros(p.n_atoms + 1);
    y0[p.n_atoms] = C64::new(1.0, 0.0);
    let traj = integrate(&gen, &y0, t_grid, opts)?;
    Ok(PjTrajectory { t_grid: traj.t_grid, p: traj.values.iter().map(|v| v.iter().map(|z| z.re).collect()).collect() })
}

/// Closed form for uniform `γ_rd^j = γ_rd`:
/// `p_j = (γ_rd t/2)^{N−j} / (N−j)! · e^{−γ_rd t/2}`, `p_0 = 1 − Σ_{j≥1} p_j`.
pub fn pj_closed_form(n: usize, gamma_rd: f64, t: f64) -> Vec<f64> {
    let s = 0.5 * gamma_rd * t;
    let mut p = vec![0.0; n + 1];
    for (j, pj) in p.iter_mut().enumerate().skip(1) {
        let k = (n - j) as u64;
        *pj = if s == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (k as f64 * s.ln() - ln_factorial(k) - s).exp()
        };
    }
    p[0] = 1.0 - p[1..].iter().sum::<f64>();
    p
}

pub fn closed_form_trajectory(n: usize, gamma_rd: f64, t_grid: &[f64]) -> PjTrajectory {
    PjTrajectory { t_grid: t_grid.to_vec(), p: t_grid.iter().map(|&t| pj_closed_form(n, gamma_rd, t)).collect() }
}

/// `Σ_j j p_j A[Ω_j, Γ_j](δ)` for given rung populations `p_0..=p_N`.
pub fn spectrum_from_populations(p: &LadderParams, pj: &[f64], delta_grid: &[f64]) -> Spectrum {
    let rates = p.collective_rates();
    let gamma = p.rates.gamma;
    let values = delta_grid
        .iter()
        .map(|&d| {
            rates
                .iter()
                .map(|r| r.j as f64 * pj[r.j] * mollow_lineshape(gamma, r.omega, r.big_gamma, r.gamma_rd, d))
                .sum()
        })
        .collect();
    Spectrum { delta_grid: delta_grid.to_vec(), values }
}

/// Quasi-steady ensemble spectrum with `p_j(t)` from the population chain.
pub fn spectrum_analytic(p: &LadderParams, t: f64, delta_grid: &[f64], opts: &IntegratorOptions) -> Result<Spectrum> {
    if t < p.default_seed_time() {
        warn!("t = {t} is below the quasi-steady threshold {:.4}", p.default_seed_time());
    }
    for (j, ratio) in p.strong_field_ratios() {
        if ratio < 10.0 {
            warn!("rung {j}: √j Ω / Γ_j = {ratio:.2} is outside the strong-field limit");
        }
    }
    let grid = if t > 0.0 { vec![0.0, t] } else { vec![0.0] };
    let traj = evolve_pj(p, &grid, opts)?;
    Ok(spectrum_from_populations(p, traj.p.last().expect("non-empty"), delta_grid))
}

/// Atomic state fractions derived from rung populations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FractionReport {
    pub t_grid: Vec<f64>,
    /// `P_d = 1 − Σ_j (j/N) p_j`
    pub p_d: Vec<f64>,
    /// `P_G0 = 1 − Σ_{j≥1} p_j`
    pub p_g0: Vec<f64>,
    /// Smooth Rydberg fraction `Σ_j p_j / 2N`.
    pub p_r: Vec<f64>,
    /// Damped Rabi term `−(p_N/2N) cos(√N Ω t) e^{−3γ_rg^N t/4}`, reported separately.
    pub p_r_oscillation: Vec<f64>,
    /// `dP_d/dt` by finite differences of `P_d`.
    pub dpd_dt_fd: Vec<f64>,
    /// `dP_d/dt = (γ_rd/2N)(1 − P_G0)`.
    pub dpd_dt_identity: Vec<f64>,
    /// `dP_d/dt = −(1/N) Σ_j j ∂_t p_j` with `∂_t p_j` from the chain equations.
    pub dpd_dt_chain: Vec<f64>,
}

impl FractionReport {
    /// `max_t |dP_d/dt (finite difference) − (γ_rd/2N)(1 − P_G0)|`
    pub fn identity_residual_fd(&self) -> f64 {
        max_diff(&self.dpd_dt_fd, &self.dpd_dt_identity)
    }

    /// `max_t |dP_d/dt (chain) − (γ_rd/2N)(1 − P_G0)|`
    pub fn identity_residual_chain(&self) -> f64 {
        max_diff(&self.dpd_dt_chain, &self.dpd_dt_identity)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Second-order finite-difference derivative on a possibly non-uniform grid.
fn gradient(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let d = (y[1] - y[0]) / (t[1] - t[0]);
            return vec![d, d];
        }
        _ => {}
    }
    // three-point Lagrange derivative evaluated at node `at` of (i, i+1, i+2)
    let three = |i: usize, at: f64| {
        let (t0, t1, t2) = (t[i], t[i + 1], t[i + 2]);
        y[i] * (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + y[i + 1] * (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + y[i + 2] * (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    (0..n)
        .map(|k| match k {
            0 => three(0, t[0]),
            k if k == n - 1 => three(n - 3, t[n - 1]),
            k => three(k - 1, t[k]),
        })
        .collect()
}

/// `dP_d/dt = −(1/N) Σ_j j ∂_t p_j` evaluated from populations.
pub fn pd_rate_from_chain(pj: &[f64], p: &LadderParams) -> f64 {
    let n = p.n_atoms;
    let rates = p.collective_rates();
    let flux = |j: usize| if j > n { 0.0 } else { rates.rung(j).gamma_rd * pj[j] };
    -(1..=n).map(|j| j as f64 * -(flux(j) - flux(j + 1)) / 2.0).sum::<f64>() / n as f64
}

pub fn fractions(traj: &PjTrajectory, p: &LadderParams) -> FractionReport {
    let n = traj.n_atoms();
    let nf = n as f64;
    let top = p.collective_rates().rung(n).to_owned();
    let gamma_rd = p.rates.gamma_rd;
    let mut report = FractionReport {
        t_grid: traj.t_grid.clone(),
        p_d: Vec::with_capacity(traj.p.len()),
        p_g0: Vec::with_capacity(traj.p.len()),
        p_r: Vec::with_capacity(traj.p.len()),
        p_r_oscillation: Vec::with_capacity(traj.p.len()),
        dpd_dt_fd: Vec::new(),
        dpd_dt_identity: Vec::with_capacity(traj.p.len()),
        dpd_dt_chain: Vec::with_capacity(traj.p.len()),
    };
    for (&t, row) in traj.t_grid.iter().zip(&traj.p) {
        let occupied: f64 = row[1..].iter().sum();
        let weighted: f64 = row.iter().enumerate().map(|(j, pj)| j as f64 * pj).sum();
        let p_g0 = 1.0 - occupied;
        report.p_d.push(1.0 - weighted / nf);
        report.p_g0.push(p_g0);
        report.p_r.push(occupied / (2.0 * nf));
        report
            .p_r_oscillation
            .push(-(row[n] / (2.0 * nf)) * (top.omega * t).cos() * (-0.75 * top.gamma_rg * t).exp());
        report.dpd_dt_identity.push(gamma_rd / (2.0 * nf) * (1.0 - p_g0));
        report.dpd_dt_chain.push(pd_rate_from_chain(row, p));
    }
    report.dpd_dt_fd = gradient(&report.t_grid, &report.p_d);
    report
}

/// `t_r = (2N/γ_rd) (2πN)^{1/2N} (1 − 2/√N)`, defined for `N ≥ 5`.
pub fn relaxation_time_closed_form(n: usize, gamma_rd: f64) -> Result<f64> {
    if gamma_rd <= 0.0 {
        return Err(ModelError::InvalidParameter("gamma_rd must be positive".into()));
    }
    let nf = n as f64;
    let factor = 1.0 - 2.0 / nf.sqrt();
    if factor <= 0.0 {
        return Err(ModelError::OutOfRange {
            what: "atom number for the closed-form relaxation time (use relaxation_time_numeric)",
            value: nf,
            range: "[5, ∞)".into(),
        });
    }
    Ok(2.0 * nf / gamma_rd * (2.0 * std::f64::consts::PI * nf).powf(1.0 / (2.0 * nf)) * factor)
}

/// `f[N, η] = η^N e^{−Nη/e}`: the leading sink term with `t = η t_c`.
pub fn pooling_onset(n: usize, eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    (nf * eta.ln() - nf * eta / std::f64::consts::E).exp()
}

/// `d f[N, η] / dη`
pub fn pooling_onset_slope(n: usize, eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    pooling_onset(n, eta) * nf * (1.0 / eta - 1.0 / std::f64::consts::E)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelaxationEstimate {
    pub n_atoms: usize,
    /// Onset of the sink population, `(e − 2e/√N) t_c`.
    pub t_r: f64,
    /// Root of `(γ_rd t/2)^N / N! = 1` with the exact factorial.
    pub t_c: f64,
    /// The same root under Stirling's approximation.
    pub t_c_stirling: f64,
    /// `η = e − e/√N`, where `df/dη` peaks.
    pub eta_max_slope: f64,
    /// `η = e − 2e/√N`; non-positive for `N ≤ 4`, where `t_r` is reported as 0.
    pub eta_onset: f64,
}

/// Relaxation time from the exact-factorial crossing time `t_c`.
pub fn relaxation_time_numeric(n: usize, gamma_rd: f64) -> Result<RelaxationEstimate> {
    if n < 2 {
        return Err(ModelError::OutOfRange { what: "atom number", value: n as f64, range: "[2, ∞)".into() });
    }
    if gamma_rd <= 0.0 {
        return Err(ModelError::InvalidParameter("gamma_rd must be positive".into()));
    }
    let nf = n as f64;
    let ln_nfact = ln_factorial(n as u64);
    let g = |t: f64| nf * (0.5 * gamma_rd * t).ln() - ln_nfact;
    let (mut lo, mut hi) = (1e-12 / gamma_rd, 2.0 * nf / gamma_rd);
    if g(lo) >= 0.0 || g(hi) < 0.0 {
        return Err(ModelError::NoConvergence(format!("t_c not bracketed in [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    if hi - lo > 1e-12 * hi {
        return Err(ModelError::NoConvergence(format!("t_c bracket [{lo}, {hi}] did not shrink")));
    }
    let t_c = 0.5 * (lo + hi);
    let e = std::f64::consts::E;
    let t_c_stirling = 2.0 * nf / (e * gamma_rd) * (2.0 * std::f64::consts::PI * nf).powf(1.0 / (2.0 * nf));
    let eta_onset = e - 2.0 * e / nf.sqrt();
    if eta_onset <= 0.0 {
        warn!("N = {n}: onset η = {eta_onset:.3} ≤ 0, the sink fills from the start; reporting t_r = 0");
    }
    Ok(RelaxationEstimate {
        n_atoms: n,
        t_r: eta_onset.max(0.0) * t_c,
        t_c,
        t_c_stirling,
        eta_max_slope: e - e / nf.sqrt(),
        eta_onset,
    })
}

/// Rydberg fraction after re-enabling the drive on a decayed diagonal state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevivalSeries {
    pub dt_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `0.1 / max_j Γ_j`, the largest delay the small-Δt′ formula is trusted for.
    pub window_limit: f64,
    pub window_exceeded: bool,
}

/// `P_r(t′ + Δt′) = (1/2N) Σ_j p_j(t′) (1 − cos(√j Ω Δt′))`.
pub fn rabi_revival(pj: &[f64], p: &LadderParams, dt_grid: &[f64]) -> RevivalSeries {
    let rates = p.collective_rates();
    let window_limit = 0.1 / rates.max_total_decay();
    let window_exceeded = dt_grid.iter().any(|&dt| dt > window_limit);
    if window_exceeded {
        warn!("revival delays exceed 0.1/max Γ_j = {window_limit:.4e}; decay during the pulse is neglected");
    }
    let nf = p.n_atoms as f64;
    let values = dt_grid
        .iter()
        .map(|&dt| rates.iter().map(|r| pj[r.j] * (1.0 - (r.omega * dt).cos())).sum::<f64>() / (2.0 * nf))
        .collect();
    RevivalSeries { dt_grid: dt_grid.to_vec(), values, window_limit, window_exceeded }
}
