//! Declarative experiment configuration (TOML), the name registry that
//! turns config sections into models/generators/payoffs/bases, and the
//! dotted-path override mechanism used by the CLI.

use serde::{Deserialize, Serialize};

use crate::bsde::{ContractionPolicy, SolverConfig};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::generators::GeneratorSpec;
use crate::paths::TimeGrid;
use crate::payoff::Payoff;
use crate::regression::RegressionBasis;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSection {
    pub n_samples: usize,
    /// Mandatory: runs are never seeded from entropy.
    pub seed: u64,
}

/// A named component with free-form parameters, resolved by the registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSection {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

fn default_picard_tol() -> f64 {
    1e-6
}
fn default_picard_max_iter() -> usize {
    50
}
fn default_basis() -> String {
    "polynomial".into()
}
fn default_degree() -> usize {
    3
}
fn default_policy() -> String {
    "warn".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    #[serde(default)]
    pub beta_weight: f64,
    #[serde(default = "default_basis")]
    pub basis: String,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub lag_steps: usize,
    #[serde(default = "default_policy")]
    pub contraction_policy: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            picard_tol: default_picard_tol(),
            picard_max_iter: default_picard_max_iter(),
            beta_weight: 0.0,
            basis: default_basis(),
            degree: default_degree(),
            lag_steps: 0,
            contraction_policy: default_policy(),
        }
    }
}

fn default_outdir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_outdir")]
    pub directory: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_outdir(),
        }
    }
}

/// Constant-coefficient large-investor market section; `impact`/`delta`
/// switch on the wealth-impacted short rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketSection {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    #[serde(default)]
    pub impact: f64,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskSection {
    pub beta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub forward: ComponentSection,
    pub generator: ComponentSection,
    pub payoff: ComponentSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub market: Option<MarketSection>,
    #[serde(default)]
    pub risk: Option<RiskSection>,
}

impl ExperimentConfig {
    /// Parse a TOML document after applying dotted-path overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(format!("config parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("config validation error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        if self.ensemble.n_samples < 2 {
            return Err(Error::config("ensemble.n_samples must be at least 2"));
        }
        let grid = self.time_grid()?;
        let gen = build_generator(&self.generator)?;
        if !gen.is_markovian() {
            grid.delay_steps(gen.delta)?;
        }
        if let Some(risk) = &self.risk {
            if risk.delta > 0.0 {
                grid.delay_steps(risk.delta)?;
            }
        }
        build_forward(&self.forward)?;
        build_payoff(&self.payoff)?;
        self.solver_config()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.t0, self.grid.t_end, self.grid.n_steps)
            .map_err(|e| Error::config(format!("grid: {e}")))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let basis = match self.solver.basis.as_str() {
            "polynomial" => RegressionBasis::Polynomial {
                degree: self.solver.degree,
            },
            "state_running_average" => RegressionBasis::StateRunningAverage,
            "state_lagged" => RegressionBasis::StateLagged {
                lag_steps: self.solver.lag_steps.max(1),
            },
            "indicator_exact" => RegressionBasis::IndicatorExact,
            other => {
                return Err(Error::config(format!("unknown basis {other:?}")));
            }
        };
        let contraction_policy = match self.solver.contraction_policy.as_str() {
            "warn" => ContractionPolicy::Warn,
            "abort" => ContractionPolicy::Abort,
            other => {
                return Err(Error::config(format!(
                    "unknown contraction policy {other:?} (use \"warn\" or \"abort\")"
                )));
            }
        };
        if self.solver.picard_tol <= 0.0 || self.solver.picard_max_iter == 0 {
            return Err(Error::config(
                "solver.picard_tol must be positive and picard_max_iter nonzero",
            ));
        }
        Ok(SolverConfig {
            picard_tol: self.solver.picard_tol,
            picard_max_iter: self.solver.picard_max_iter,
            beta_weight: self.solver.beta_weight,
            contraction_policy,
            basis,
        })
    }

    /// Canonical TOML echo, embedded in the run manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Apply one `path.to.key=value` override onto a TOML tree. The value is
/// parsed as TOML (so numbers and booleans work); anything that fails to
/// parse is taken as a bare string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {spec:?} is not of the form key=value")))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override path {path:?} crosses a non-table")))?;
        if k + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(toml::Table::new()));
    }
    unreachable!("loop returns on the last component")
}

fn f64_param(params: &toml::Table, key: &str, what: &str) -> Result<f64> {
    match params.get(key) {
        Some(toml::Value::Float(v)) => Ok(*v),
        Some(toml::Value::Integer(v)) => Ok(*v as f64),
        Some(other) => Err(Error::config(format!(
            "{what}: parameter {key:?} must be a number, got {other}"
        ))),
        None => Err(Error::config(format!("{what}: missing parameter {key:?}"))),
    }
}

fn f64_param_or(params: &toml::Table, key: &str, default: f64, what: &str) -> Result<f64> {
    if params.contains_key(key) {
        f64_param(params, key, what)
    } else {
        Ok(default)
    }
}

fn usize_param(params: &toml::Table, key: &str, what: &str) -> Result<usize> {
    match params.get(key) {
        Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
        Some(other) => Err(Error::config(format!(
            "{what}: parameter {key:?} must be a non-negative integer, got {other}"
        ))),
        None => Err(Error::config(format!("{what}: missing parameter {key:?}"))),
    }
}

/// Initial state of the anchor path, shared by all forward models.
pub fn initial_state(section: &ComponentSection) -> Result<f64> {
    f64_param_or(&section.params, "s0", 1.0, &section.name)
}

/// Resolve a forward-model section by name.
pub fn build_forward(section: &ComponentSection) -> Result<ForwardModel> {
    let p = &section.params;
    let what = format!("forward model {:?}", section.name);
    match section.name.as_str() {
        "gbm" => Ok(ForwardModel::gbm(
            f64_param_or(p, "mu", 0.0, &what)?,
            f64_param(p, "vol", &what)?,
        )),
        "brownian" => Ok(ForwardModel::brownian(
            f64_param_or(p, "drift", 0.0, &what)?,
            f64_param_or(p, "vol", 1.0, &what)?,
        )),
        "lagged_drift" => Ok(ForwardModel::lagged_drift(
            f64_param(p, "kappa", &what)?,
            usize_param(p, "lag_steps", &what)?,
            f64_param(p, "vol", &what)?,
        )),
        "running_average_drift" => Ok(ForwardModel::running_average_drift(
            f64_param(p, "kappa", &what)?,
            f64_param(p, "vol", &what)?,
        )),
        "linear_drift" => Ok(ForwardModel::linear_drift(
            f64_param(p, "a", &what)?,
            f64_param(p, "vol", &what)?,
        )),
        other => Err(Error::config(format!("unknown forward model {other:?}"))),
    }
}

/// Resolve a generator section by name.
pub fn build_generator(section: &ComponentSection) -> Result<GeneratorSpec> {
    let p = &section.params;
    let what = format!("generator {:?}", section.name);
    match section.name.as_str() {
        "zero" => Ok(GeneratorSpec::zero()),
        "discounting" => Ok(GeneratorSpec::discounting(f64_param(p, "r", &what)?)),
        "moving_average" => GeneratorSpec::moving_average(
            f64_param(p, "beta", &what)?,
            f64_param(p, "delta", &what)?,
        ),
        "lagged" => GeneratorSpec::lagged(
            f64_param(p, "kappa", &what)?,
            f64_param(p, "delta", &what)?,
        ),
        other => Err(Error::config(format!("unknown generator {other:?}"))),
    }
}

/// Resolve a payoff section by name.
pub fn build_payoff(section: &ComponentSection) -> Result<Payoff> {
    let p = &section.params;
    let what = format!("payoff {:?}", section.name);
    match section.name.as_str() {
        "constant" => Ok(Payoff::constant(f64_param(p, "value", &what)?)),
        "terminal_value" => Ok(Payoff::terminal_value()),
        "call" => Ok(Payoff::call(f64_param(p, "strike", &what)?)),
        "put" => Ok(Payoff::put(f64_param(p, "strike", &what)?)),
        "average_call" => Ok(Payoff::average_call(f64_param(p, "strike", &what)?)),
        other => Err(Error::config(format!("unknown payoff {other:?}"))),
    }
}
