//! Experiment configuration files.

use serde::{Deserialize, Serialize};
use urysohn_core::experiments::{ExperimentConfig, Generator, DEFAULT_BUDGET, DEFAULT_P_TRIALS};
use urysohn_core::generate::ApproximationParams;
use urysohn_core::logic::{make_extension_axiom, parse_sentence, EvalMode, ExtensionAxiomSpec};
use urysohn_core::metric::validate_space;
use urysohn_core::rng::{derive_seed, Purpose};
use urysohn_core::{ExtensionVector, FiniteMetricSpace, Mode};

use crate::Failure;

/// An extension axiom given by its target space and distance vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomConfig {
    /// Full distance matrix of the target; a single point when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<Vec<f64>>>,
    pub r: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    ExtensionAxiomSpec::DEFAULT_LAMBDA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum HostConfig {
    Approximation {
        target_size: usize,
        #[serde(default = "default_max_base")]
        max_base: usize,
        #[serde(default)]
        grid: u32,
        /// Derived from the master seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Sequential {
        reference_size: usize,
        #[serde(default)]
        grid: u32,
    },
}

fn default_max_base() -> usize {
    ApproximationParams::new(1, 0).max_base
}

/// The on-disk experiment configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_axiom: Option<AxiomConfig>,
    pub epsilon: f64,
    pub m_values: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_p_trials")]
    pub p_trials: usize,
    pub host: HostConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub eval_mode: EvalMode,
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_p_trials() -> usize {
    DEFAULT_P_TRIALS
}

fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::invalid(format!("config: {e}")))
    }

    /// Fills in the master seed and every derived seed, so the result can be
    /// rerun as is.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Self {
        let seed = seed_override.or(self.seed).unwrap_or(0);
        self.seed = Some(seed);
        if let HostConfig::Approximation { seed: host_seed @ None, .. } = &mut self.host {
            *host_seed = Some(derive_seed(seed, Purpose::Host, &[0]));
        }
        self
    }

    /// Builds the library configuration. Call after [`FileConfig::resolve`].
    pub fn to_experiment(&self) -> Result<(ExperimentConfig, String), Failure> {
        let sentence = match (&self.sentence, &self.extension_axiom) {
            (Some(text), None) => parse_sentence(text).map_err(|e| Failure::invalid(format!("sentence: {e}")))?,
            (None, Some(axiom)) => make_extension_axiom(&axiom.to_spec()?)
                .map_err(|e| Failure::invalid(format!("extension_axiom: {e}")))?,
            _ => return Err(Failure::invalid("config needs exactly one of `sentence` and `extension_axiom`")),
        };
        let generator = match self.host {
            HostConfig::Approximation { target_size, max_base, grid, seed } => {
                Generator::Approximation(ApproximationParams {
                    target_size,
                    max_base,
                    grid,
                    seed: seed.expect("resolved config carries a host seed"),
                })
            }
            HostConfig::Sequential { reference_size, grid } => Generator::Sequential { reference_size, grid },
        };
        let rendered = sentence.to_string();
        let mut config = ExperimentConfig::new(
            sentence,
            self.epsilon,
            self.m_values.clone(),
            self.trials,
            generator,
            self.seed.expect("resolved config carries a seed"),
        );
        config.eval_mode = self.eval_mode;
        config.p_trials = self.p_trials;
        config.budget = self.budget;
        Ok((config, rendered))
    }
}

impl AxiomConfig {
    fn to_spec(&self) -> Result<ExtensionAxiomSpec, Failure> {
        let target = match &self.target {
            None => FiniteMetricSpace::singleton(),
            Some(rows) => validate_space(rows, Mode::Metric)
                .map_err(|e| Failure::invalid(format!("extension_axiom target: {e}")))?,
        };
        let mut spec = ExtensionAxiomSpec::new(target, ExtensionVector::new(self.r.clone()));
        spec.lambda = self.lambda;
        Ok(spec)
    }
}
