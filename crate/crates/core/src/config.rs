//! TOML run configuration.
//!
//! ```toml
//! output_dir = "out"
//!
//! [problem]
//! kind = "particles"
//! particle_count = 4
//! alpha = 2.0
//!
//! [simulate]
//! step_count = 1024
//! seed = 7
//! ```
//!
//! Every section except `[problem]` has defaults. Unknown keys are
//! rejected. `--set section.key=value` overrides are applied to the parsed
//! table before it is deserialized, so they go through the same checks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{ConditionName, DiffusionConvention};
use crate::error::{Error, Result};
use crate::harness::ExperimentPlan;
use crate::particles::{build_problem, equispaced_positions, Confinement, ParticleSystemSpec};
use crate::sde::{LinearDrift, PolynomialDrift, SdeProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write sample trajectories as CSV.
    #[serde(default = "default_true")]
    pub emit_paths: bool,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub plan: ExperimentPlan,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_true() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn dim_one() -> usize {
    1
}

fn unit_state() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfinementKind {
    Quadratic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Equispaced,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// The singular interacting particle system.
    Particles {
        particle_count: usize,
        alpha: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "default_confinement")]
        confinement: ConfinementKind,
        /// `Q'(x) = stiffness · x` for quadratic confinement.
        #[serde(default = "one")]
        stiffness: f64,
        #[serde(default = "default_initial")]
        initial: InitialKind,
        #[serde(default = "one")]
        spacing: f64,
        /// Used when `initial = "explicit"`.
        #[serde(default)]
        positions: Vec<f64>,
        #[serde(default = "one")]
        lyapunov_constant: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// `b(x) = x − x³` componentwise, `V = c(1 + |x|^l)`.
    Polynomial {
        #[serde(default = "dim_one")]
        dimension: usize,
        #[serde(default = "one")]
        lyapunov_constant: f64,
        #[serde(default = "two")]
        lyapunov_power: f64,
        #[serde(default = "one")]
        noise_intensity: f64,
        #[serde(default = "unit_state")]
        initial_state: Vec<f64>,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// `b(x) = −rate · x` with constant `V`; the calibration problem.
    Linear {
        #[serde(default = "dim_one")]
        dimension: usize,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        noise_intensity: f64,
        #[serde(default = "unit_state")]
        initial_state: Vec<f64>,
        #[serde(default = "one")]
        horizon: f64,
    },
}

fn default_confinement() -> ConfinementKind {
    ConfinementKind::Quadratic
}

fn default_initial() -> InitialKind {
    InitialKind::Equispaced
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub step_count: u64,
    pub paths: u64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { step_count: 1024, paths: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionConfig {
    Ito,
    Literal,
}

impl From<DiffusionConfig> for DiffusionConvention {
    fn from(d: DiffusionConfig) -> Self {
        match d {
            DiffusionConfig::Ito => DiffusionConvention::Ito,
            DiffusionConfig::Literal => DiffusionConvention::Literal,
        }
    }
}

/// Assumption sweeps. Constants left unset fall back to the calibrated
/// values for the particle system where those exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub conditions: Vec<ConditionName>,
    pub samples: u64,
    pub seed: u64,
    /// Half-width of the sampling box for problems without a singular
    /// boundary.
    pub box_half_width: f64,
    pub lipschitz_constant: Option<f64>,
    pub higher_order_constant: Option<f64>,
    pub monotonicity_constant: Option<f64>,
    pub generator_p: f64,
    pub generator_q: Option<f64>,
    pub generator_a: Option<f64>,
    pub generator_b: f64,
    pub estimate_generator_constant: bool,
    pub diffusion: DiffusionConfig,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            conditions: vec![
                ConditionName::LyapunovLipschitz,
                ConditionName::HigherOrder,
                ConditionName::Generator,
                ConditionName::Monotonicity,
            ],
            samples: 10_000,
            seed: 0,
            box_half_width: 5.0,
            lipschitz_constant: None,
            higher_order_constant: None,
            monotonicity_constant: None,
            generator_p: 2.0,
            generator_q: None,
            generator_a: None,
            generator_b: 0.0,
            estimate_generator_constant: false,
            diffusion: DiffusionConfig::Ito,
        }
    }
}

impl ProblemConfig {
    pub fn particle_spec(&self) -> Result<Option<ParticleSystemSpec>> {
        let ProblemConfig::Particles {
            particle_count,
            alpha,
            sigma,
            confinement,
            stiffness,
            initial,
            spacing,
            positions,
            lyapunov_constant,
            ..
        } = self
        else {
            return Ok(None);
        };
        let initial_positions = match initial {
            InitialKind::Equispaced => equispaced_positions(*particle_count, *spacing),
            InitialKind::Explicit => {
                if positions.len() != *particle_count {
                    return Err(Error::usage(format!(
                        "problem.positions has {} entries, problem.particle_count is {particle_count}",
                        positions.len()
                    )));
                }
                positions.clone()
            }
        };
        let confinement = match confinement {
            ConfinementKind::Quadratic => Confinement::Quadratic { stiffness: *stiffness },
            ConfinementKind::None => Confinement::None,
        };
        Ok(Some(ParticleSystemSpec {
            particle_count: *particle_count,
            alpha: *alpha,
            sigma: *sigma,
            confinement,
            initial_positions,
            lyapunov_constant: *lyapunov_constant,
        }))
    }

    pub fn build(&self) -> Result<SdeProblem> {
        match self {
            ProblemConfig::Particles { horizon, .. } => {
                build_problem(&self.particle_spec()?.expect("particle config"), *horizon)
            }
            ProblemConfig::Polynomial {
                dimension,
                lyapunov_constant,
                lyapunov_power,
                noise_intensity,
                initial_state,
                horizon,
            } => {
                let model = PolynomialDrift::with_power(*dimension, *lyapunov_constant, *lyapunov_power);
                SdeProblem::new(Arc::new(model), *noise_intensity, initial_state.clone(), *horizon)
            }
            ProblemConfig::Linear { dimension, rate, noise_intensity, initial_state, horizon } => {
                let model = LinearDrift::new(*dimension, *rate, 1.0);
                SdeProblem::new(Arc::new(model), *noise_intensity, initial_state.clone(), *horizon)
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `key.path=value` overrides to a parsed table. Values are read as
/// TOML when they parse, as bare strings otherwise.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("--set expects key=value, got {item:?}")))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::usage(format!("--set: malformed key {key:?}")));
        }
        let mut current = &mut *table;
        for part in &parts[..parts.len() - 1] {
            let entry = current.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            current = entry
                .as_table_mut()
                .ok_or_else(|| Error::usage(format!("--set: {part:?} in {key:?} is not a section")))?;
        }
        current.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::usage(format!("config: {}", e.message())))?;
        apply_overrides(&mut table, overrides)?;
        let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::usage(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section against the invariants of the module it feeds.
    pub fn validate(&self) -> Result<()> {
        self.problem.build()?;
        self.plan.validate()?;
        if self.simulate.step_count == 0 || self.simulate.paths == 0 {
            return Err(Error::usage("simulate.step_count and simulate.paths must be positive"));
        }
        if self.check.samples == 0 {
            return Err(Error::usage("check.samples must be positive"));
        }
        if !(self.check.box_half_width > 0.0) {
            return Err(Error::usage("check.box_half_width must be positive"));
        }
        Ok(())
    }
}
