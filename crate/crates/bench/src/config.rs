use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rsvf_core::posterior::{PopulationModelParams, Resolution};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hoeffding,
    Bci,
    Rsvf,
    Mean,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hoeffding, Method::Bci, Method::Rsvf, Method::Mean];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hoeffding => "hoeffding",
            Method::Bci => "bci",
            Method::Rsvf => "rsvf",
            Method::Mean => "mean",
        }
    }

    /// Whether the method needs posterior samples.
    pub fn is_bayesian(self) -> bool {
        self != Method::Hoeffding
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).with_context(|| format!("unknown method `{s}`"))
    }
}

/// One non-terminal state whose single action leads to one of `terminals`
/// absorbing states with fixed values drawn uniformly from `[0, max_value]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleStateShape {
    pub terminals: usize,
    pub max_value: f64,
    pub value_seed: u64,
    pub discount: f64,
}

impl SingleStateShape {
    fn validate(&self) -> Result<()> {
        if self.terminals < 2 {
            bail!("need at least 2 terminal states");
        }
        if !(self.discount >= 0.0 && self.discount < 1.0) {
            bail!("discount must lie in [0, 1)");
        }
        if !(self.max_value.is_finite() && self.max_value > 0.0) {
            bail!("max_value must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletProblem {
    #[serde(default = "defaults::terminals")]
    pub terminals: usize,
    #[serde(default = "defaults::max_value")]
    pub max_value: f64,
    #[serde(default = "defaults::value_seed")]
    pub value_seed: u64,
    #[serde(default = "defaults::discount")]
    pub discount: f64,
    #[serde(default = "defaults::concentration")]
    pub prior_concentration: f64,
}

/// Logit-Gaussian stand-in for a Gaussian prior on the transition row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianProblem {
    #[serde(default = "defaults::terminals")]
    pub terminals: usize,
    #[serde(default = "defaults::max_value")]
    pub max_value: f64,
    #[serde(default = "defaults::value_seed")]
    pub value_seed: u64,
    #[serde(default = "defaults::discount")]
    pub discount: f64,
    #[serde(default)]
    pub logit_mean: f64,
    #[serde(default = "defaults::logit_sd")]
    pub logit_sd: f64,
    #[serde(default = "defaults::chain_length")]
    pub chain_length: usize,
}

impl DirichletProblem {
    pub fn shape(&self) -> SingleStateShape {
        SingleStateShape {
            terminals: self.terminals,
            max_value: self.max_value,
            value_seed: self.value_seed,
            discount: self.discount,
        }
    }
}

impl GaussianProblem {
    pub fn shape(&self) -> SingleStateShape {
        SingleStateShape {
            terminals: self.terminals,
            max_value: self.max_value,
            value_seed: self.value_seed,
            discount: self.discount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    #[serde(default)]
    pub params: PopulationModelParams,
    #[serde(default = "defaults::bins")]
    pub bins: usize,
    #[serde(default = "defaults::cost_population")]
    pub cost_population: f64,
    #[serde(default = "defaults::cost_control")]
    pub cost_control: f64,
    #[serde(default = "defaults::discount")]
    pub discount: f64,
    /// Initial population as a fraction of capacity.
    #[serde(default = "defaults::initial_fraction")]
    pub initial_fraction: f64,
    #[serde(default = "defaults::sd_lambda_bar")]
    pub prior_sd_lambda_bar: f64,
    #[serde(default = "defaults::sd_beta1")]
    pub prior_sd_beta1: f64,
    #[serde(default = "defaults::sd_beta2")]
    pub prior_sd_beta2: f64,
    #[serde(default = "defaults::chain_length")]
    pub chain_length: usize,
    #[serde(default)]
    pub resolution: Resolution,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all species fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    SingleStateDirichlet(DirichletProblem),
    SingleStateGaussian(GaussianProblem),
    SpeciesMdp(SpeciesConfig),
}

impl ProblemConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemConfig::SingleStateDirichlet(_) => "single_state_dirichlet",
            ProblemConfig::SingleStateGaussian(_) => "single_state_gaussian",
            ProblemConfig::SpeciesMdp(_) => "species_mdp",
        }
    }

    /// Human-readable note on how the posterior is modelled.
    pub fn posterior_note(&self) -> &'static str {
        match self {
            ProblemConfig::SingleStateDirichlet(_) => "conjugate Dirichlet posterior",
            ProblemConfig::SingleStateGaussian(_) => {
                "logit-Gaussian stand-in: Gaussian prior on softmax logits, sampled by Metropolis-Hastings"
            }
            ProblemConfig::SpeciesMdp(_) => "Gaussian prior on growth parameters, sampled by Metropolis-Hastings",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    pub samples_per_cell: Vec<usize>,
    pub replications: usize,
    pub posterior_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::rsvf_max_iters")]
    pub rsvf_max_iters: usize,
    /// Check the RSVF safety condition on an independent posterior draw.
    #[serde(default)]
    pub rsvf_fresh_verification: bool,
    pub problem: ProblemConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).context("parsing experiment config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("at least one method is required");
        }
        if self.samples_per_cell.is_empty() {
            bail!("samples_per_cell must not be empty");
        }
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta {} must lie in (0, 1)", self.delta);
        }
        if self.posterior_samples == 0 {
            bail!("posterior_samples must be at least 1");
        }
        if self.rsvf_max_iters == 0 {
            bail!("rsvf_max_iters must be at least 1");
        }
        match &self.problem {
            ProblemConfig::SingleStateDirichlet(p) => {
                p.shape().validate()?;
                if !(p.prior_concentration > 0.0) {
                    bail!("prior_concentration must be positive");
                }
            }
            ProblemConfig::SingleStateGaussian(p) => {
                p.shape().validate()?;
                if !(p.logit_sd >= 0.0) {
                    bail!("logit_sd must be non-negative");
                }
                if p.chain_length < self.posterior_samples {
                    bail!("chain_length must be at least posterior_samples");
                }
            }
            ProblemConfig::SpeciesMdp(species) => {
                if species.bins < 2 {
                    bail!("species model needs at least 2 bins");
                }
                if !(0.0..=1.0).contains(&species.initial_fraction) {
                    bail!("initial_fraction must lie in [0, 1]");
                }
                if species.chain_length < self.posterior_samples {
                    bail!("chain_length must be at least posterior_samples");
                }
            }
        }
        Ok(())
    }
}

mod defaults {
    pub fn terminals() -> usize {
        10
    }
    pub fn max_value() -> f64 {
        10.0
    }
    pub fn value_seed() -> u64 {
        7
    }
    pub fn discount() -> f64 {
        0.9
    }
    pub fn concentration() -> f64 {
        1.0
    }
    pub fn logit_sd() -> f64 {
        1.0
    }
    pub fn chain_length() -> usize {
        4000
    }
    pub fn bins() -> usize {
        50
    }
    pub fn cost_population() -> f64 {
        1.0
    }
    pub fn cost_control() -> f64 {
        100.0
    }
    pub fn initial_fraction() -> f64 {
        0.3
    }
    pub fn sd_lambda_bar() -> f64 {
        0.2
    }
    pub fn sd_beta1() -> f64 {
        0.001
    }
    pub fn sd_beta2() -> f64 {
        0.000025
    }
    pub fn delta() -> f64 {
        0.05
    }
    pub fn rsvf_max_iters() -> usize {
        20
    }
}
