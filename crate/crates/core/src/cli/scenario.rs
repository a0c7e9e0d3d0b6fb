use crate::decomposition::{
    evolve_pj, fractions, rabi_revival, relaxation_time_closed_form, relaxation_time_numeric, spectrum_analytic,
    FractionReport, PjTrajectory,
};
use crate::ladder::{
    ensemble_spectrum_numeric, evolve_ladder, g2_numeric, pj_numeric, state_at, LadderParams, LadderState,
};
use crate::linsys::{integrate, symmetric_grid, uniform_grid, IntegratorOptions, Spectrum, SpectrumOptions};
use crate::single_atom::{self, Regime, RegimeThresholds};
use crate::ModelError;

use super::{CliError, Model, Product, ScenarioConfig, Table};

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter(_) | ModelError::OutOfRange { .. } => CliError::Config(e.to_string()),
            ModelError::NoConvergence(_) | ModelError::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

/// One emitted table; `suffix` distinguishes per-N files of a sweep.
pub struct Output {
    pub suffix: String,
    pub table: Table,
}

/// Runs a validated scenario. Output depends only on the configuration.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<Output>, CliError> {
    cfg.validate()?;
    if cfg.product == Product::Relaxation {
        return Ok(vec![Output { suffix: String::new(), table: relaxation_table(cfg)? }]);
    }
    let sweep = cfg.n_atoms.len() > 1;
    cfg.n_atoms
        .iter()
        .map(|&n| {
            let p = cfg.ladder_params(n)?;
            let table = match cfg.model {
                Model::Single => single_table(cfg, &p)?,
                Model::Ladder => ladder_table(cfg, &p)?,
                Model::Decomposition => decomposition_table(cfg, &p)?,
            }
            .with_meta("n_atoms", n);
            Ok(Output { suffix: if sweep { format!("_N{n}") } else { String::new() }, table })
        })
        .collect()
}

fn header(cfg: &ScenarioConfig, columns: Vec<String>) -> Table {
    Table::new(columns)
        .with_meta("tool", concat!("blockade-ladder ", env!("CARGO_PKG_VERSION")))
        .with_meta("model", format!("{:?}", cfg.model).to_lowercase())
        .with_meta("product", cfg.product.name())
}

fn names(fixed: &[&str]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).collect()
}

fn default_t_max(p: &LadderParams) -> f64 {
    let rd = p.rates.gamma_rd;
    if rd > 0.0 {
        4.0 * p.n_atoms as f64 / rd
    } else {
        20.0 / p.collective_rates().min_total_decay()
    }
}

fn time_grid(cfg: &ScenarioConfig, p: &LadderParams) -> Vec<f64> {
    uniform_grid(cfg.t_max.unwrap_or_else(|| default_t_max(p)), cfg.t_steps + 1)
}

fn delta_grid(cfg: &ScenarioConfig, p: &LadderParams) -> Vec<f64> {
    let half = cfg.delta_range.unwrap_or_else(|| {
        let rates = p.collective_rates();
        let top = rates.rung(p.n_atoms);
        let gamma_min = rates.min_total_decay();
        if top.omega >= gamma_min {
            1.5 * top.omega
        } else {
            // weak drive: a single peak of half-width γ_rd Ω²/Γ²
            let width = p.rates.gamma_rd * (p.rates.omega / gamma_min).powi(2);
            if width > 0.0 { 20.0 * width } else { 5.0 * gamma_min }
        }
    });
    symmetric_grid(half, cfg.delta_steps)
}

fn spectrum_options(cfg: &ScenarioConfig) -> SpectrumOptions {
    let opts = SpectrumOptions::with_method(cfg.spectrum_method);
    if cfg.subtract_stationary { opts.subtracting_stationary() } else { opts }
}

/// Value at the grid point closest to `δ = 0`.
fn value_at_center(s: &Spectrum) -> f64 {
    let i = s
        .delta_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map_or(0, |(i, _)| i);
    s.values[i]
}

fn spectrum_table(cfg: &ScenarioConfig, numeric: Option<&Spectrum>, analytic: &Spectrum, extra: &[Spectrum]) -> Table {
    let mut columns = vec!["delta".to_string()];
    let reference = match numeric {
        Some(num) => {
            columns.extend(names(&["S_numeric", "S_analytic", "S_normalized", "S_analytic_normalized"]));
            value_at_center(num)
        }
        None => {
            columns.extend(names(&["S_analytic", "S_normalized"]));
            value_at_center(analytic)
        }
    };
    columns.extend((1..=extra.len()).map(|j| format!("S_rung_{j}")));
    let mut t = header(cfg, columns).with_meta("normalization", reference);
    for (i, &d) in analytic.delta_grid.iter().enumerate() {
        let mut row = vec![d];
        match numeric {
            Some(num) => row.extend([
                num.values[i],
                analytic.values[i],
                num.values[i] / reference,
                analytic.values[i] / reference,
            ]),
            None => row.extend([analytic.values[i], analytic.values[i] / reference]),
        }
        row.extend(extra.iter().map(|s| s.values[i]));
        t.push(row);
    }
    t
}

fn populations_table(cfg: &ScenarioConfig, n: usize, t_grid: &[f64], pj: &[Vec<f64>]) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend((0..=n).map(|j| format!("p_{j}")));
    columns.push("total".into());
    let mut t = header(cfg, columns);
    for (&time, row) in t_grid.iter().zip(pj) {
        let mut r = vec![time];
        r.extend(row);
        r.push(row.iter().sum());
        t.push(r);
    }
    t
}

fn fractions_table(cfg: &ScenarioConfig, f: &FractionReport, ladder_pr: Option<&[f64]>) -> Table {
    let mut columns =
        names(&["t", "P_d", "P_G0", "P_r", "P_r_oscillation", "dPd_dt_fd", "dPd_dt_identity", "dPd_dt_chain"]);
    if ladder_pr.is_some() {
        columns.push("P_r_ladder".into());
    }
    let mut t = header(cfg, columns).with_meta("identity_residual_fd", f.identity_residual_fd());
    for i in 0..f.t_grid.len() {
        let mut row = vec![
            f.t_grid[i],
            f.p_d[i],
            f.p_g0[i],
            f.p_r[i],
            f.p_r_oscillation[i],
            f.dpd_dt_fd[i],
            f.dpd_dt_identity[i],
            f.dpd_dt_chain[i],
        ];
        if let Some(pr) = ladder_pr {
            row.push(pr[i]);
        }
        t.push(row);
    }
    t
}

fn revival_table(cfg: &ScenarioConfig, p: &LadderParams, t_prime: f64, pj: &[f64], ladder: bool) -> Result<Table, CliError> {
    let window = 0.1 / p.collective_rates().max_total_decay();
    let dt_grid = uniform_grid(cfg.t_max.unwrap_or(window), cfg.t_steps + 1);
    let formula = rabi_revival(pj, p, &dt_grid);
    let restarted = if ladder {
        let traj = evolve_ladder(p, &dt_grid, Some(&LadderState::diagonal(pj)), &IntegratorOptions::default())?;
        Some(traj.states.iter().map(LadderState::rydberg_fraction).collect::<Vec<_>>())
    } else {
        None
    };
    let mut columns = names(&["dt", "P_r"]);
    if restarted.is_some() {
        columns.push("P_r_ladder".into());
    }
    let mut t = header(cfg, columns)
        .with_meta("t_prime", t_prime)
        .with_meta("window_limit", formula.window_limit)
        .with_meta("window_exceeded", formula.window_exceeded);
    for (i, &dt) in dt_grid.iter().enumerate() {
        let mut row = vec![dt, formula.values[i]];
        if let Some(r) = &restarted {
            row.push(r[i]);
        }
        t.push(row);
    }
    Ok(t)
}

fn revival_time(cfg: &ScenarioConfig, p: &LadderParams) -> f64 {
    cfg.seed_time.unwrap_or_else(|| if p.rates.gamma_rd > 0.0 { 2.0 / p.rates.gamma_rd } else { p.default_seed_time() })
}

fn single_table(cfg: &ScenarioConfig, p: &LadderParams) -> Result<Table, CliError> {
    let rates = p.rates;
    let opts = IntegratorOptions::default();
    match cfg.product {
        Product::TimeSeries => {
            let grid = time_grid(cfg, p);
            let traj = integrate(&single_atom::single_atom_generator(&rates), &single_atom::ground_state(), &grid, &opts)
                .map_err(ModelError::from)?;
            let mut t = header(cfg, names(&["t", "sigma_gg", "sigma_rr", "re_sigma_gr", "im_sigma_gr", "sigma_dd"]));
            for (time, v) in grid.iter().zip(&traj.values) {
                use single_atom::{DD, GG, GR, RR};
                t.push(vec![*time, v[GG].re, v[RR].re, v[GR].re, v[GR].im, v[DD].re]);
            }
            Ok(t)
        }
        Product::Spectrum => {
            let seed = cfg.seed_time.unwrap_or(single_atom::QUASI_STEADY_DECAY_TIMES / rates.total_decay());
            let grid = delta_grid(cfg, p);
            let numeric = single_atom::spectrum_numeric(&rates, seed, &grid, &spectrum_options(cfg))?;
            let weak = rates.regime(&RegimeThresholds::default()) == Regime::WeakField && rates.gamma_rd > 0.0;
            let analytic = if weak {
                single_atom::wfl_spectrum_analytic(&rates, seed, &grid)?
            } else {
                single_atom::sfl_spectrum_analytic(&rates, seed, &grid)
            };
            Ok(spectrum_table(cfg, Some(&numeric), &analytic, &[]).with_meta("seed_time", seed))
        }
        _ => unreachable!("rejected by validate"),
    }
}

fn ladder_table(cfg: &ScenarioConfig, p: &LadderParams) -> Result<Table, CliError> {
    let opts = IntegratorOptions::default();
    match cfg.product {
        Product::TimeSeries => {
            let grid = time_grid(cfg, p);
            let traj = evolve_ladder(p, &grid, None, &opts)?;
            Ok(populations_table(cfg, p.n_atoms, &grid, &traj.pj()))
        }
        Product::Spectrum => {
            let seed = cfg.seed_time.unwrap_or_else(|| p.default_seed_time());
            let grid = delta_grid(cfg, p);
            let numeric = ensemble_spectrum_numeric(p, seed, &grid, &spectrum_options(cfg))?;
            let analytic = spectrum_analytic(p, seed, &grid, &opts)?;
            Ok(spectrum_table(cfg, Some(&numeric.total), &analytic, &numeric.rungs).with_meta("seed_time", seed))
        }
        Product::G2 => {
            let seed = cfg.seed_time.unwrap_or_else(|| p.default_seed_time());
            let tau_max = cfg.t_max.unwrap_or_else(|| 4.0 / p.collective_rates().min_total_decay());
            let g2 = g2_numeric(p, seed, &uniform_grid(tau_max, cfg.t_steps + 1), &opts)?;
            let mut t = header(cfg, names(&["tau", "G2", "intensity", "g2"])).with_meta("seed_time", seed);
            for i in 0..g2.tau_grid.len() {
                t.push(vec![g2.tau_grid[i], g2.unnormalized[i], g2.intensity[i], g2.normalized[i]]);
            }
            Ok(t)
        }
        Product::Fractions => {
            let grid = time_grid(cfg, p);
            let traj = evolve_ladder(p, &grid, None, &opts)?;
            let pj = PjTrajectory { t_grid: grid, p: traj.pj() };
            let pr: Vec<f64> = traj.states.iter().map(LadderState::rydberg_fraction).collect();
            Ok(fractions_table(cfg, &fractions(&pj, p), Some(&pr)))
        }
        Product::Revival => {
            let t_prime = revival_time(cfg, p);
            let pj = pj_numeric(&state_at(p, t_prime, &opts)?);
            revival_table(cfg, p, t_prime, &pj, true)
        }
        Product::Relaxation => unreachable!("rejected by validate"),
    }
}

fn decomposition_table(cfg: &ScenarioConfig, p: &LadderParams) -> Result<Table, CliError> {
    let opts = IntegratorOptions::default();
    match cfg.product {
        Product::TimeSeries => {
            let grid = time_grid(cfg, p);
            let traj = evolve_pj(p, &grid, &opts)?;
            Ok(populations_table(cfg, p.n_atoms, &grid, &traj.p))
        }
        Product::Spectrum => {
            let seed = cfg.seed_time.unwrap_or_else(|| p.default_seed_time());
            let analytic = spectrum_analytic(p, seed, &delta_grid(cfg, p), &opts)?;
            Ok(spectrum_table(cfg, None, &analytic, &[]).with_meta("seed_time", seed))
        }
        Product::Fractions => {
            let traj = evolve_pj(p, &time_grid(cfg, p), &opts)?;
            Ok(fractions_table(cfg, &fractions(&traj, p), None))
        }
        Product::Revival => {
            let t_prime = revival_time(cfg, p);
            let traj = evolve_pj(p, &[0.0, t_prime], &opts)?;
            revival_table(cfg, p, t_prime, traj.p.last().expect("two samples"), false)
        }
        Product::G2 | Product::Relaxation => unreachable!("rejected by validate"),
    }
}

fn relaxation_table(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let gamma_rd = cfg.rates.gamma_rd;
    let mut t = header(cfg, names(&["N", "t_r_closed", "t_r_numeric", "rel_diff", "t_c", "t_c_stirling"]));
    for &n in &cfg.n_atoms {
        let numeric = relaxation_time_numeric(n, gamma_rd)?;
        let closed = match relaxation_time_closed_form(n, gamma_rd) {
            Ok(v) => v,
            Err(ModelError::OutOfRange { .. }) => {
                log::warn!("N = {n}: closed-form relaxation time undefined, numeric route only");
                f64::NAN
            }
            Err(e) => return Err(e.into()),
        };
        let rel = (closed - numeric.t_r).abs() / numeric.t_r;
        t.push(vec![n as f64, closed, numeric.t_r, rel, numeric.t_c, numeric.t_c_stirling]);
    }
    Ok(t)
}
