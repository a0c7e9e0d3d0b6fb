//! Command-line front end: scenario runs that emit CSV/JSON tables with a
//! JSON run manifest, and a table comparison tool.

mod compare;
mod config;
mod scenario;
mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};

pub use compare::{compare_tables, ColumnDeviation, CompareOptions};
pub use config::{parse_flipping, Model, Preset, Product, ScenarioConfig};
pub use scenario::{run_scenario, Output};
pub use table::{manifest_path, Format, Manifest, Table, SCHEMA_VERSION, UNITS_NOTE};

use crate::linsys::SpectrumMethod;
use crate::single_atom::rabi_from_photon_rate;

pub const THREADS_ENV: &str = "BLOCKADE_LADDER_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
            Self::Tolerance(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blockade-ladder", version, about = "Dynamics and scattered-light spectra of Rydberg-blockaded Λ atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its data table.
    Simulate(SimulateArgs),
    /// Compare two data tables column by column.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("product").args(["spectrum", "g2", "fractions", "relaxation", "revival"])))]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub model: Model,
    /// Named parameter set.
    #[arg(long, value_enum, conflicts_with = "config")]
    pub preset: Option<Preset>,
    /// JSON scenario file (the `config` object of a run manifest).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Atom numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Rabi frequency Ω.
    #[arg(long, conflicts_with = "photon_rate")]
    pub omega: Option<f64>,
    /// Probe photon rate f, giving Ω = 2√(fγ).
    #[arg(long)]
    pub photon_rate: Option<f64>,
    /// Collective r→g enhancement rate γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Single-atom r→g decay rate.
    #[arg(long)]
    pub gamma_rg: Option<f64>,
    /// Single-atom r→d decay rate.
    #[arg(long)]
    pub gamma_rd: Option<f64>,
    /// none | prop:<c_rg>,<c_rd> | table:<file>
    #[arg(long)]
    pub flipping: Option<String>,
    /// End of the time grid (default 4N/γ_rd).
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of time intervals.
    #[arg(long)]
    pub t_steps: Option<usize>,
    /// Half-width of the δ grid.
    #[arg(long)]
    pub delta_range: Option<f64>,
    /// Number of δ grid points.
    #[arg(long)]
    pub delta_steps: Option<usize>,
    /// Time at which correlations are seeded.
    #[arg(long)]
    pub seed_time: Option<f64>,
    /// Spectrum evaluation: quadrature | resolvent.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<SpectrumMethod>,
    /// Drop the elastic part of the correlation before transforming.
    #[arg(long)]
    pub subtract_stationary: bool,
    /// Emission spectrum.
    #[arg(long)]
    pub spectrum: bool,
    /// Intensity correlation g²(τ).
    #[arg(long)]
    pub g2: bool,
    /// Pooling fractions and the decay identity.
    #[arg(long)]
    pub fractions: bool,
    /// Relaxation times for each N.
    #[arg(long)]
    pub relaxation: bool,
    /// Rabi revival of P_r after t′.
    #[arg(long)]
    pub revival: bool,
    /// Output file; stdout when absent. Sweeps over N insert `_N<n>` before the extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_method(s: &str) -> Result<SpectrumMethod, String> {
    match s {
        "quadrature" => Ok(SpectrumMethod::Quadrature),
        "resolvent" => Ok(SpectrumMethod::Resolvent),
        _ => Err("expected quadrature or resolvent".into()),
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub tolerance: f64,
    /// Tolerance is a fraction of each column's peak magnitude in the first file.
    #[arg(long)]
    pub relative_to_peak: bool,
    /// Compare column `a` of the first file with column `b` of the second; repeatable.
    #[arg(long, value_parser = parse_pair)]
    pub map: Vec<(String, String)>,
    /// Skip rows whose key is below this value.
    #[arg(long)]
    pub key_min: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(|| format!("expected a=b, got {s}"))
}

impl SimulateArgs {
    fn product(&self) -> Product {
        match (self.spectrum, self.g2, self.fractions, self.relaxation, self.revival) {
            (true, ..) => Product::Spectrum,
            (_, true, ..) => Product::G2,
            (_, _, true, ..) => Product::Fractions,
            (_, _, _, true, _) => Product::Relaxation,
            (.., true) => Product::Revival,
            _ => Product::TimeSeries,
        }
    }

    /// Preset or config file first, then individual flags.
    pub fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let product = self.product();
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, Some(preset)) => preset.config(self.model, product),
            (None, None) => ScenarioConfig::new(self.model, product),
        };
        cfg.model = self.model;
        if self.config.is_none() || product != Product::TimeSeries {
            cfg.product = product;
        }
        if let Some(n) = &self.n {
            cfg.n_atoms = n.clone();
        }
        let r = &mut cfg.rates;
        r.gamma = self.gamma.unwrap_or(r.gamma);
        r.gamma_rg = self.gamma_rg.unwrap_or(r.gamma_rg);
        r.gamma_rd = self.gamma_rd.unwrap_or(r.gamma_rd);
        r.omega = self.omega.unwrap_or(r.omega);
        if let Some(f) = self.photon_rate {
            r.omega = rabi_from_photon_rate(f, r.gamma).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(spec) = &self.flipping {
            cfg.flipping = parse_flipping(spec)?;
        }
        cfg.t_max = self.t_max.or(cfg.t_max);
        cfg.t_steps = self.t_steps.unwrap_or(cfg.t_steps);
        cfg.delta_range = self.delta_range.or(cfg.delta_range);
        cfg.delta_steps = self.delta_steps.unwrap_or(cfg.delta_steps);
        cfg.seed_time = self.seed_time.or(cfg.seed_time);
        cfg.spectrum_method = self.method.unwrap_or(cfg.spectrum_method);
        cfg.subtract_stationary |= self.subtract_stationary;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `dir/run.csv` + `_N10` → `dir/run_N10.csv`
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = args.resolve()?;
    let start = Instant::now();
    let outputs = run_scenario(&cfg)?;
    let Some(out) = &args.out else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        for o in &outputs {
            o.table.write(&mut lock, args.format)?;
        }
        return Ok(Vec::new());
    };
    let paths: Vec<PathBuf> = outputs.iter().map(|o| with_suffix(out, &o.suffix)).collect();
    for (o, path) in outputs.iter().zip(&paths) {
        o.table.save(path, args.format)?;
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    for path in &paths {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema_version: SCHEMA_VERSION,
            units: UNITS_NOTE.into(),
            config: cfg.clone(),
            outputs: paths.clone(),
            wall_time_s,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let mpath = manifest_path(path);
        std::fs::write(&mpath, text + "\n")
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", mpath.display())))?;
    }
    Ok(paths)
}

pub fn compare(args: &CompareArgs) -> Result<Vec<ColumnDeviation>, CliError> {
    let a = Table::load(&args.a)?;
    let b = Table::load(&args.b)?;
    let opts = CompareOptions {
        tolerance: args.tolerance,
        relative_to_peak: args.relative_to_peak,
        map: args.map.clone(),
        key_min: args.key_min,
    };
    let report = compare_tables(&a, &b, &opts)?;
    println!("{:<24} {:<24} {:>12} {:>12} {:>12}  result", "column A", "column B", "max_abs", "rms", "limit");
    for c in &report {
        println!(
            "{:<24} {:<24} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
            c.a,
            c.b,
            c.max_abs,
            c.rms,
            c.limit,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = report.iter().filter(|c| !c.passed).map(|c| c.a.as_str()).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Tolerance(failed.join(", ")))
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_exit_code<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(args) => simulate(args).map(|_| ()),
        Command::Compare(args) => compare(args).map(|_| ()),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_file_names() {
        assert_eq!(with_suffix(Path::new("a/run.csv"), "_N10"), PathBuf::from("a/run_N10.csv"));
        assert_eq!(with_suffix(Path::new("run"), "_N3"), PathBuf::from("run_N3"));
        assert_eq!(with_suffix(Path::new("run.csv"), ""), PathBuf::from("run.csv"));
    }

    #[test]
    fn flags_override_preset() {
        let cli = Cli::try_parse_from([
            "blockade-ladder", "simulate", "ladder", "--preset", "fig3", "--omega", "40", "--n", "2,4", "--spectrum",
        ])
        .unwrap();
        let Command::Simulate(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.rates.omega, 40.0);
        assert_eq!(cfg.n_atoms, vec![2, 4]);
        assert_eq!(cfg.product, Product::Spectrum);
        assert_eq!(cfg.flipping, Preset::Fig3.flipping());
    }

    #[test]
    fn photon_rate_sets_rabi_frequency() {
        let cli = Cli::try_parse_from(["x", "simulate", "single", "--photon-rate", "225", "--gamma", "1"]).unwrap();
        let Command::Simulate(args) = cli.command else { panic!() };
        assert_eq!(args.resolve().unwrap().rates.omega, 30.0);
    }

    #[test]
    fn usage_errors() {
        assert!(Cli::try_parse_from(["x", "simulate", "ladder", "--spectrum", "--g2"]).is_err());
        assert!(Cli::try_parse_from(["x", "simulate", "ladder", "--omega", "1", "--photon-rate", "1"]).is_err());
        assert_eq!(main_exit_code(["x", "simulate", "ladder", "--gamma-rg", "-1"]), 1);
        assert_eq!(main_exit_code(["x", "simulate", "single", "--relaxation"]), 1);
    }
}
