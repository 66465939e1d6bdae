//! Experiment configuration: one TOML file per experiment.

use std::fs;
use std::path::Path;

use levyhj_core::bounds::Scheme;
use levyhj_core::regularity::Quantity;
use levyhj_core::{
    Case, Error as CoreError, GridFunction, Hamiltonian, HamiltonianSpec, LevyOperatorSpec,
    Profile, SolverConfig, SpectralGrid,
};
use serde::Deserialize;
use thiserror::Error;

/// Default ceiling on the solver's resident field storage.
pub const DEFAULT_MEMORY_BUDGET_MB: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn from_core(field: &str, e: CoreError) -> Self {
        Self::invalid(field, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub period: f64,
    pub n: usize,
    #[serde(default)]
    pub memory_budget_mb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InitialData {
    #[serde(flatten)]
    pub profile: Profile,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv_path: String,
    #[serde(default)]
    pub plot_script: bool,
    /// Writes one binary snapshot per time node (`solve` only).
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    #[serde(default = "default_orders")]
    pub m: Vec<usize>,
    /// Explicit times; otherwise `count` geometric times on `[t_min, t_max]`,
    /// which default to the grid's resolved window.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_orders() -> Vec<usize> {
    vec![1]
}
fn default_count() -> usize {
    8
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        KernelCheckConfig {
            m: default_orders(),
            times: None,
            t_min: None,
            t_max: None,
            count: default_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    #[default]
    Solve,
    HeatFlow,
}

/// How a fitted slope is compared with the predicted slope `-p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateCheck {
    /// `|slope - predicted| <= tolerance`.
    #[default]
    TwoSided,
    /// `slope <= predicted + tolerance`.
    AtMost,
    /// `slope >= predicted - tolerance`.
    AtLeast,
}

fn default_tolerance() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRow {
    pub quantity: Quantity,
    /// Blow-up exponent `p` of `O(t^{-p})`.
    pub predicted: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub check: RateCheck,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default)]
    pub source: RateSource,
    pub rows: Vec<RateRow>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsRow {
    pub k: usize,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default)]
    pub holder_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub rows: Vec<ConstantsRow>,
}

fn default_oracle_nodes() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleScheme {
    #[default]
    Lower,
    Trapezoid,
}

impl From<OracleScheme> for Scheme {
    fn from(s: OracleScheme) -> Scheme {
        match s {
            OracleScheme::Lower => Scheme::Lower,
            OracleScheme::Trapezoid => Scheme::Trapezoid,
        }
    }
}

/// Parameters of a Grönwall validation run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case", deny_unknown_fields)]
pub enum GronwallConfig {
    /// `u <= a0 t^{-gamma} + aT0 + c int (t-s)^{-zeta} u`.
    First {
        a0: f64,
        #[serde(rename = "aT0")]
        at0: f64,
        c: f64,
        gamma: f64,
        zeta: f64,
        #[serde(rename = "T0")]
        t0: f64,
        #[serde(default = "default_oracle_nodes")]
        n: usize,
        #[serde(default)]
        scheme: OracleScheme,
    },
    /// `u <= a t^{abar-1} + b int (t-s)^{bbar-1} s^{gbar-1} u`.
    Second {
        a: f64,
        b: f64,
        alpha_bar: f64,
        beta_bar: f64,
        gamma_bar: f64,
        #[serde(rename = "T")]
        horizon: f64,
        #[serde(default = "default_oracle_nodes")]
        n: usize,
        #[serde(default = "default_series_tol")]
        tol: f64,
        #[serde(default)]
        scheme: OracleScheme,
    },
}

fn default_series_tol() -> f64 {
    1e-15
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: LevyOperatorSpec,
    pub hamiltonian: HamiltonianSpec,
    pub initial_data: InitialData,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel_check: Option<KernelCheckConfig>,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub constants: Option<ConstantsConfig>,
    #[serde(default)]
    pub gronwall: Option<GronwallConfig>,
}

/// Objects built from a validated configuration.
pub struct Setup {
    pub grid: SpectralGrid,
    pub hamiltonian: Hamiltonian,
    pub u0: GridFunction,
    pub alpha: f64,
}

/// Reads and validates an experiment file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build().map(|_| ())
    }

    /// Validates every cross-field condition and samples the fields.
    pub fn build(&self) -> Result<Setup, ConfigError> {
        let g = &self.grid;
        if !(1..=3).contains(&g.d) {
            return Err(ConfigError::invalid(
                "grid.d",
                format!("d = {} must be 1, 2 or 3", g.d),
            ));
        }
        if g.n < 8 || !g.n.is_power_of_two() {
            return Err(ConfigError::invalid(
                "grid.n",
                format!("n = {} must be a power of two >= 8", g.n),
            ));
        }
        if !(g.period.is_finite() && g.period > 0.0) {
            return Err(ConfigError::invalid(
                "grid.period",
                "period must be positive",
            ));
        }
        let budget = g.memory_budget_mb.unwrap_or(DEFAULT_MEMORY_BUDGET_MB);
        // fields and gradients per node, two Picard iterates, plus spectra
        let per_node = (g.n as f64).powi(g.d as i32) * 8.0 * (1.0 + g.d as f64);
        let needed_mb = per_node * (2.0 * self.solver.n_times as f64 + 8.0) / 1048576.0;
        if needed_mb > budget {
            return Err(ConfigError::invalid(
                "grid.n",
                format!("run needs about {needed_mb:.0} MB, over the {budget:.0} MB memory budget"),
            ));
        }
        let grid =
            SpectralGrid::new(g.d, g.period, g.n).map_err(|e| ConfigError::from_core("grid", e))?;
        if self.operator.dimension != g.d {
            return Err(ConfigError::invalid(
                "operator.dimension",
                format!(
                    "operator dimension {} differs from grid.d = {}",
                    self.operator.dimension, g.d
                ),
            ));
        }
        let alpha = self
            .operator
            .effective_order()
            .map_err(|e| ConfigError::from_core("operator", e))?;
        self.hamiltonian
            .validate()
            .map_err(|e| ConfigError::from_core("hamiltonian", e))?;
        let r = self.hamiltonian.growth();
        self.solver.resolve(alpha, r).map_err(|e| {
            let field = if e.to_string().contains("(U0')") {
                "solver.delta"
            } else {
                "solver"
            };
            ConfigError::from_core(field, e)
        })?;
        let profile = self.profile();
        profile
            .validate()
            .map_err(|e| ConfigError::from_core("initial_data", e))?;
        if !self.initial_data.amplitude.is_finite() {
            return Err(ConfigError::invalid(
                "initial_data.amplitude",
                "must be finite",
            ));
        }
        if self.solver.case == Case::I && profile.nominal_holder_exponent() < 1.0 {
            return Err(ConfigError::invalid(
                "initial_data",
                "case I needs Lipschitz initial data; use case II for Hölder data",
            ));
        }
        if let (Case::II, Some(delta)) = (self.solver.case, self.solver.delta) {
            if delta > profile.nominal_holder_exponent() {
                return Err(ConfigError::invalid(
                    "solver.delta",
                    format!(
                        "delta = {delta} exceeds the Hölder exponent {} of the initial data",
                        profile.nominal_holder_exponent()
                    ),
                ));
            }
        }
        let hamiltonian = Hamiltonian::new(&self.hamiltonian, &grid)
            .map_err(|e| ConfigError::from_core("hamiltonian", e))?;
        hamiltonian
            .check_declared_beta()
            .map_err(|e| ConfigError::from_core("hamiltonian.constants.beta", e))?;
        let u0 = profile
            .sample(&grid, self.initial_data.amplitude)
            .map_err(|e| ConfigError::from_core("initial_data", e))?;
        if self.outputs.csv_path.trim().is_empty() {
            return Err(ConfigError::invalid("outputs.csv_path", "path is empty"));
        }
        if let Some(rates) = &self.rates {
            for (i, row) in rates.rows.iter().enumerate() {
                if !(row.tolerance >= 0.0) {
                    return Err(ConfigError::invalid(
                        &format!("rates.rows[{i}].tolerance"),
                        "tolerance must be nonnegative",
                    ));
                }
                if let Some((lo, hi)) = row.window {
                    if !(lo > 0.0 && lo < hi) {
                        return Err(ConfigError::invalid(
                            &format!("rates.rows[{i}].window"),
                            "window must satisfy 0 < lo < hi",
                        ));
                    }
                }
            }
        }
        if let Some(kc) = &self.kernel_check {
            if kc.m.is_empty() || kc.m.iter().any(|m| *m == 0 || *m > 4) {
                return Err(ConfigError::invalid(
                    "kernel_check.m",
                    "orders must lie in 1..=4",
                ));
            }
        }
        Ok(Setup {
            grid,
            hamiltonian,
            u0,
            alpha,
        })
    }

    /// Initial-data profile with the experiment seed filled in.
    pub fn profile(&self) -> Profile {
        match &self.initial_data.profile {
            Profile::RandomBandlimited { seed: None, cutoff } => Profile::RandomBandlimited {
                seed: Some(self.seed),
                cutoff: *cutoff,
            },
            p => p.clone(),
        }
    }
}
