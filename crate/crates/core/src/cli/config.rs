use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::ladder::{FlippingModel, LadderParams};
use crate::linsys::SpectrumMethod;
use crate::single_atom::RateParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Single,
    Ladder,
    Decomposition,
}

/// What a run emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    #[default]
    TimeSeries,
    Spectrum,
    G2,
    Fractions,
    Relaxation,
    Revival,
}

impl Product {
    pub fn name(self) -> &'static str {
        match self {
            Self::TimeSeries => "time_series",
            Self::Spectrum => "spectrum",
            Self::G2 => "g2",
            Self::Fractions => "fractions",
            Self::Relaxation => "relaxation",
            Self::Revival => "revival",
        }
    }
}

/// Parameter sets of the published figures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Rung populations, N = 3 with flipping.
    Fig3,
    /// Ensemble spectrum, same parameters seeded at t = 5/(γ_rg + γ_rd).
    Fig4,
    /// Pooling fractions, N ∈ {10, 100} without flipping.
    Fig5,
}

impl Preset {
    pub fn rates(self) -> RateParams {
        RateParams { gamma: 1.0, gamma_rg: 1.0, gamma_rd: 1.0, omega: 30.0 }
    }

    pub fn flipping(self) -> FlippingModel {
        match self {
            Self::Fig3 | Self::Fig4 => FlippingModel::Proportional { c_rg: 0.5, c_rd: 0.5 },
            Self::Fig5 => FlippingModel::None,
        }
    }

    pub fn atom_numbers(self) -> Vec<usize> {
        match self {
            Self::Fig3 | Self::Fig4 => vec![3],
            Self::Fig5 => vec![10, 100],
        }
    }

    pub fn ladder_params(self) -> Vec<LadderParams> {
        self.atom_numbers()
            .into_iter()
            .map(|n| LadderParams::new(n, self.rates(), self.flipping()).expect("preset parameters are valid"))
            .collect()
    }

    pub fn config(self, model: Model, product: Product) -> ScenarioConfig {
        let rates = self.rates();
        ScenarioConfig {
            model,
            product,
            n_atoms: self.atom_numbers(),
            rates,
            flipping: self.flipping(),
            t_max: match self {
                Self::Fig3 | Self::Fig4 => Some(10.0),
                Self::Fig5 => None,
            },
            seed_time: match self {
                Self::Fig4 => Some(5.0 / (rates.gamma_rg + rates.gamma_rd)),
                _ => None,
            },
            ..ScenarioConfig::new(model, product)
        }
    }
}

/// Fully resolved scenario. Rates are dimensionless, in units of `γ_rd`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: Model,
    #[serde(default)]
    pub product: Product,
    pub n_atoms: Vec<usize>,
    pub rates: RateParams,
    #[serde(default)]
    pub flipping: FlippingModel,
    /// Time window (or τ window for g²); defaults depend on the model.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Number of time intervals.
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    /// Half-width of the symmetric δ grid.
    #[serde(default)]
    pub delta_range: Option<f64>,
    /// Number of δ points.
    #[serde(default = "default_delta_steps")]
    pub delta_steps: usize,
    /// Seeding time for spectra, g² and revival.
    #[serde(default)]
    pub seed_time: Option<f64>,
    #[serde(default)]
    pub spectrum_method: SpectrumMethod,
    /// Remove the elastic (stationary) part of the correlation before transforming.
    #[serde(default)]
    pub subtract_stationary: bool,
}

fn default_t_steps() -> usize {
    1000
}

fn default_delta_steps() -> usize {
    2049
}

impl ScenarioConfig {
    pub fn new(model: Model, product: Product) -> Self {
        Self {
            model,
            product,
            n_atoms: vec![1],
            rates: RateParams { gamma: 1.0, gamma_rg: 1.0, gamma_rd: 1.0, omega: 30.0 },
            flipping: FlippingModel::None,
            t_max: None,
            t_steps: default_t_steps(),
            delta_range: None,
            delta_steps: default_delta_steps(),
            seed_time: None,
            spectrum_method: SpectrumMethod::Quadrature,
            subtract_stationary: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n_atoms.is_empty() || self.n_atoms.contains(&0) {
            return bad("atom numbers must be a non-empty list of positive integers".into());
        }
        if self.model == Model::Single && self.n_atoms != [1] {
            return bad("the single-atom model takes no atom number other than 1".into());
        }
        self.rates.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for &n in &self.n_atoms {
            self.flipping.validate(n).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.t_steps == 0 || self.delta_steps == 0 {
            return bad("grids need at least one step".into());
        }
        for (what, v) in [("t_max", self.t_max), ("delta_range", self.delta_range), ("seed_time", self.seed_time)] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 || (what != "seed_time" && v == 0.0) {
                    return bad(format!("{what} = {v} is out of range"));
                }
            }
        }
        let supported = matches!(
            (self.model, self.product),
            (_, Product::TimeSeries | Product::Spectrum)
                | (Model::Ladder, Product::G2)
                | (Model::Ladder | Model::Decomposition, Product::Fractions | Product::Revival)
                | (Model::Decomposition, Product::Relaxation)
        );
        if !supported {
            return bad(format!("{:?} does not provide {}", self.model, self.product.name()));
        }
        Ok(())
    }

    pub fn ladder_params(&self, n: usize) -> Result<LadderParams, CliError> {
        LadderParams::new(n, self.rates, self.flipping.clone()).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Parses `none`, `prop:<c_rg>,<c_rd>` or `table:<file>`.
///
/// Table files are CSV with columns `d_rg,d_rd` and one row per rung, `j = 1` first.
pub fn parse_flipping(spec: &str) -> Result<FlippingModel, CliError> {
    let err = |msg: String| CliError::Config(format!("--flipping {spec}: {msg}"));
    if spec == "none" {
        return Ok(FlippingModel::None);
    }
    if let Some(rest) = spec.strip_prefix("prop:") {
        let parts: Vec<&str> = rest.split(',').collect();
        let [c_rg, c_rd] = parts[..] else {
            return Err(err("expected two comma-separated coefficients".into()));
        };
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| err(e.to_string()));
        return Ok(FlippingModel::Proportional { c_rg: parse(c_rg)?, c_rd: parse(c_rd)? });
    }
    if let Some(file) = spec.strip_prefix("table:") {
        #[derive(Deserialize)]
        struct Row {
            d_rg: f64,
            d_rd: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(file)
            .map_err(|e| err(e.to_string()))?;
        let rows: Vec<Row> = reader.deserialize().collect::<Result<_, _>>().map_err(|e| err(e.to_string()))?;
        return Ok(FlippingModel::Table {
            d_rg: rows.iter().map(|r| r.d_rg).collect(),
            d_rd: rows.iter().map(|r| r.d_rd).collect(),
        });
    }
    Err(err("expected none, prop:<c_rg>,<c_rd> or table:<file>".into()))
}
