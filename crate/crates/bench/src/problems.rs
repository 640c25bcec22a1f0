//! Benchmark problems: true models, datasets and posteriors.

use anyhow::{Context, Result};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rsvf_core::posterior::{
    dirichlet_posterior, gaussian_logit_posterior, species_posterior, ChainSettings, DirichletPrior, LogitGaussianPrior,
    PosteriorSampleSet, SpeciesDynamics, SpeciesPrior, TransitionDataset, CONTROL,
};
use rsvf_core::seed::derive;
use rsvf_core::{TabularMDP, TransitionModel};

use crate::config::{ProblemConfig, SingleStateShape, SpeciesConfig};

/// Draws `n_per_cell` successors i.i.d. from every row of `truth`.
pub fn generate_dataset(truth: &TransitionModel, n_per_cell: usize, seed: u64) -> Result<TransitionDataset> {
    let (s, a) = (truth.num_states(), truth.num_actions());
    let mut triples = Vec::with_capacity(s * a * n_per_cell);
    if n_per_cell > 0 {
        for cell in 0..s * a {
            let dist = WeightedIndex::new(truth.cell_row(cell)).context("transition row is not a distribution")?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[cell as u64]));
            for _ in 0..n_per_cell {
                triples.push((cell / a, cell % a, dist.sample(&mut rng)));
            }
        }
    }
    Ok(TransitionDataset::new(s, a, triples)?)
}

/// Terminal values, drawn once from the shape's value seed.
pub fn terminal_values(shape: &SingleStateShape) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(shape.value_seed);
    (0..shape.terminals).map(|_| rng.random::<f64>() * shape.max_value).collect()
}

/// State 0 has one action moving to a terminal state `1..=T`; terminal `i`
/// loops on itself with reward `v_i (1 - gamma)` so its value is `v_i`.
pub fn single_state_mdp(shape: &SingleStateShape) -> Result<TabularMDP> {
    let t = shape.terminals;
    let values = terminal_values(shape);
    let mut rewards = vec![0.0];
    rewards.extend(values.iter().map(|v| v * (1.0 - shape.discount)));
    let mut initial = vec![0.0; t + 1];
    initial[0] = 1.0;
    let mut support = vec![(1..=t).collect::<Vec<_>>()];
    support.extend((1..=t).map(|i| vec![i]));
    Ok(TabularMDP::new(t + 1, 1, rewards, shape.discount, initial)?.with_support(support)?)
}

fn single_state_truth(mdp: &TabularMDP, first_row: Vec<f64>) -> Result<TransitionModel> {
    let s = mdp.num_states();
    let mut rows = vec![first_row];
    rows.extend((1..s).map(|i| {
        let mut r = vec![0.0; s];
        r[i] = 1.0;
        r
    }));
    Ok(TransitionModel::from_rows(s, 1, rows)?)
}

/// Species MDP with its true transition model and the tabulated dynamics.
pub struct SpeciesSetup {
    pub mdp: TabularMDP,
    pub truth: TransitionModel,
    pub dynamics: SpeciesDynamics,
}

/// Population bins as states, actions "no control" and "control"; reward
/// `-c_N N(s) - c_a [a = control]`, start at the bin nearest the configured
/// fraction of capacity.
pub fn build_species_mdp(config: &SpeciesConfig) -> Result<SpeciesSetup> {
    let dynamics = SpeciesDynamics::new(&config.params, config.bins, config.resolution)?;
    let bins = config.bins;
    let rewards = (0..bins * 2)
        .map(|cell| {
            let (bin, action) = (cell / 2, cell % 2);
            let control = if action == CONTROL { config.cost_control } else { 0.0 };
            -config.cost_population * dynamics.population(bin) - control
        })
        .collect();
    let mut initial = vec![0.0; bins];
    initial[(config.initial_fraction * (bins - 1) as f64).round() as usize] = 1.0;
    let mdp = TabularMDP::new(bins, 2, rewards, config.discount, initial)?;
    let truth = dynamics.model(&config.params)?;
    Ok(SpeciesSetup { mdp, truth, dynamics })
}

enum Kind {
    Dirichlet { concentration: f64 },
    Gaussian { mean: f64, sd: f64, chain_length: usize },
    Species { setup: Box<SpeciesSetup>, prior: SpeciesPrior, chain_length: usize },
}

/// A benchmark problem ready for repeated replications.
pub struct Problem {
    mdp: TabularMDP,
    kind: Kind,
}

impl Problem {
    pub fn prepare(config: &ProblemConfig) -> Result<Self> {
        Ok(match config {
            ProblemConfig::SingleStateDirichlet(p) => Self {
                mdp: single_state_mdp(&p.shape())?,
                kind: Kind::Dirichlet { concentration: p.prior_concentration },
            },
            ProblemConfig::SingleStateGaussian(p) => Self {
                mdp: single_state_mdp(&p.shape())?,
                kind: Kind::Gaussian { mean: p.logit_mean, sd: p.logit_sd, chain_length: p.chain_length },
            },
            ProblemConfig::SpeciesMdp(c) => {
                let setup = build_species_mdp(c)?;
                let prior = SpeciesPrior {
                    mean: c.params,
                    sd_lambda_bar: c.prior_sd_lambda_bar,
                    sd_beta1: c.prior_sd_beta1,
                    sd_beta2: c.prior_sd_beta2,
                };
                Self { mdp: setup.mdp.clone(), kind: Kind::Species { setup: Box::new(setup), prior, chain_length: c.chain_length } }
            }
        })
    }

    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }

    /// True model of one replication. The single-state benchmarks draw the
    /// uncertain row from the prior; the species model is fixed.
    pub fn draw_truth(&self, seed: u64) -> Result<TransitionModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.mdp.num_states();
        match &self.kind {
            Kind::Dirichlet { concentration } => {
                let gamma = Gamma::new(*concentration, 1.0).context("prior concentration")?;
                let mut row = vec![0.0; s];
                // Tiny concentrations can underflow every draw; resample until some mass survives.
                loop {
                    for &j in self.mdp.support(0) {
                        row[j] = gamma.sample(&mut rng);
                    }
                    let total: f64 = row.iter().sum();
                    if total > 0.0 {
                        row.iter_mut().for_each(|x| *x /= total);
                        break;
                    }
                }
                single_state_truth(&self.mdp, row)
            }
            Kind::Gaussian { mean, sd, .. } => {
                let support = self.mdp.support(0);
                let logits: Vec<f64> =
                    support.iter().map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut row = vec![0.0; s];
                support.iter().zip(&logits).for_each(|(&j, l)| row[j] = (l - max).exp());
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
                single_state_truth(&self.mdp, row)
            }
            Kind::Species { setup, .. } => Ok(setup.truth.clone()),
        }
    }

    pub fn posterior(&self, data: &TransitionDataset, m: usize, seed: u64) -> Result<PosteriorSampleSet> {
        Ok(match &self.kind {
            Kind::Dirichlet { concentration } => {
                dirichlet_posterior(&DirichletPrior::symmetric(&self.mdp, *concentration)?, data, m, seed)?
            }
            Kind::Gaussian { mean, sd, chain_length } => {
                let s = self.mdp.num_states();
                let prior = LogitGaussianPrior::broadcast(&self.mdp, &vec![*mean; s], &vec![*sd; s])?;
                gaussian_logit_posterior(&prior, data, m, *chain_length, seed)?
            }
            Kind::Species { setup, prior, chain_length } => {
                species_posterior(prior, &setup.dynamics, data, m, ChainSettings::new(*chain_length), seed)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DirichletProblem;

    #[test]
    fn empty_and_point_mass_datasets() {
        let truth = TransitionModel::from_rows(2, 1, vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let data = generate_dataset(&truth, 0, 1).unwrap();
        assert!(data.is_empty());
        let data = generate_dataset(&truth, 50, 1).unwrap();
        assert_eq!(data.counts(0), &[0, 50]);
        assert_eq!(data.total(1), 50);
    }

    #[test]
    fn single_state_values_are_reproduced() {
        let shape = serde_json::from_str::<DirichletProblem>("{}").unwrap().shape();
        let mdp = single_state_mdp(&shape).unwrap();
        let values = terminal_values(&shape);
        assert_eq!(mdp.num_states(), 11);
        assert_eq!(mdp.uncertain_cells(), 1);
        let problem = Problem::prepare(&ProblemConfig::SingleStateDirichlet(serde_json::from_str("{}").unwrap())).unwrap();
        let truth = problem.draw_truth(3).unwrap();
        let (_, v) = rsvf_core::solve_nominal(&mdp, &truth).unwrap();
        for (i, x) in values.iter().enumerate() {
            assert!((v[i + 1] - x).abs() < 1e-7);
        }
        let expected: f64 = truth.row(0, 0).iter().zip(&v.0).map(|(p, x)| p * x).sum::<f64>() * shape.discount;
        assert!((v[0] - expected).abs() < 1e-7);
        assert!(values.iter().all(|&x| (0.0..=10.0).contains(&x)));
    }
}
