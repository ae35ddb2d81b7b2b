//! TOML run configuration.
//!
//! Every field has a default, so an empty file is a valid configuration;
//! unknown keys are rejected. A resolved configuration round-trips through
//! serialization unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{
    StepSchedule, DEFAULT_ALPHA0, DEFAULT_EPS_ALPHA, DEFAULT_EPS_RHO, DEFAULT_RHO0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    NnCsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Snext,
    Dsgd,
    Csgd,
    Csca,
}

impl AlgorithmName {
    pub fn is_centralized(self) -> bool {
        matches!(self, AlgorithmName::Csgd | AlgorithmName::Csca)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmName::Snext => "snext",
            AlgorithmName::Dsgd => "dsgd",
            AlgorithmName::Csgd => "csgd",
            AlgorithmName::Csca => "csca",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// CSV path; required when `kind = "nn_csv"`.
    pub dataset: Option<String>,
    /// Target column name; required when `kind = "nn_csv"`.
    pub target_column: Option<String>,
    /// Hidden layer widths of the regression network.
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub batch_size: usize,
    /// Variable dimension of the synthetic quadratic.
    pub dimension: usize,
    pub condition_number: f64,
    pub noise_scale: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Quadratic,
            dataset: None,
            target_column: None,
            hidden: vec![30, 30],
            lambda: 1e-2,
            batch_size: 1,
            dimension: 10,
            condition_number: 10.0,
            noise_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub agent_count: usize,
    pub edge_probability: f64,
    pub graph_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            agent_count: 6,
            edge_probability: 0.5,
            graph_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    pub name: AlgorithmName,
    pub alpha0: f64,
    pub eps_alpha: f64,
    pub rho0: f64,
    pub eps_rho: f64,
    pub tau: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            name: AlgorithmName::Snext,
            alpha0: DEFAULT_ALPHA0,
            eps_alpha: DEFAULT_EPS_ALPHA,
            rho0: DEFAULT_RHO0,
            eps_rho: DEFAULT_EPS_RHO,
            tau: 1.0,
        }
    }
}

impl AlgorithmConfig {
    pub fn schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.alpha0, self.eps_alpha, self.rho0, self.eps_rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub budget: usize,
    pub seed: u64,
    /// Output directory for the metrics CSV and checkpoint.
    pub output: String,
    pub metric_period: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            budget: 1000,
            seed: 0,
            output: "out".into(),
            metric_period: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub network: NetworkConfig,
    pub algorithm: AlgorithmConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Range and consistency checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::ConfigValue {
                    key: key.into(),
                    reason: "must be at least 1".into(),
                })
            }
        };
        positive("batch_size", self.problem.batch_size)?;
        positive("agent_count", self.network.agent_count)?;
        positive("budget", self.run.budget)?;
        positive("metric_period", self.run.metric_period)?;
        if !(self.problem.lambda >= 0.0) {
            return Err(Error::ConfigValue {
                key: "lambda".into(),
                reason: format!("must be nonnegative, got {}", self.problem.lambda),
            });
        }
        if !(self.algorithm.tau > 0.0) {
            return Err(Error::ConfigValue {
                key: "tau".into(),
                reason: format!("must be positive, got {}", self.algorithm.tau),
            });
        }
        if !(0.0..=1.0).contains(&self.network.edge_probability) {
            return Err(Error::ConfigValue {
                key: "edge_probability".into(),
                reason: format!("must be in [0, 1], got {}", self.network.edge_probability),
            });
        }
        self.algorithm.schedule()?;
        match self.problem.kind {
            ProblemKind::NnCsv => {
                if self.problem.dataset.is_none() {
                    return Err(Error::ConfigValue {
                        key: "dataset".into(),
                        reason: "required when kind = \"nn_csv\"".into(),
                    });
                }
                if self.problem.target_column.is_none() {
                    return Err(Error::ConfigValue {
                        key: "target_column".into(),
                        reason: "required when kind = \"nn_csv\"".into(),
                    });
                }
                if !(self.problem.condition_number >= 1.0) {
                    return Err(Error::ConfigValue {
                        key: "condition_number".into(),
                        reason: "must be at least 1".into(),
                    });
                }
            }
            ProblemKind::Quadratic => {
                positive("dimension", self.problem.dimension)?;
                if !(self.problem.condition_number >= 1.0) {
                    return Err(Error::ConfigValue {
                        key: "condition_number".into(),
                        reason: format!(
                            "must be at least 1, got {}",
                            self.problem.condition_number
                        ),
                    });
                }
                if !(self.problem.noise_scale >= 0.0) {
                    return Err(Error::ConfigValue {
                        key: "noise_scale".into(),
                        reason: "must be nonnegative".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses a TOML configuration, fills defaults and validates ranges.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Built-in starting-point configurations for `gen-config`.
pub fn template(name: &str) -> Result<RunConfig> {
    match name {
        "quadratic" => Ok(RunConfig::default()),
        "nn" => {
            let mut config = RunConfig::default();
            config.problem.kind = ProblemKind::NnCsv;
            config.problem.dataset = Some("data.csv".into());
            config.problem.target_column = Some("target".into());
            config.problem.batch_size = 10;
            config.run.budget = 2000;
            Ok(config)
        }
        other => Err(Error::Config(format!(
            "unknown template {other:?}; available: quadratic, nn"
        ))),
    }
}
