use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mcmc::{ChainSettings, RandomWalk};
use super::{PosteriorSampleSet, TransitionDataset};
use crate::error::{invalid, Result};
use crate::mdp::TabularMDP;
use crate::seed::derive;

/// Independent Gaussian priors on the softmax logits of each transition row,
/// over the structural support of each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitGaussianPrior {
    num_states: usize,
    num_actions: usize,
    mean: Vec<f64>,
    sd: Vec<f64>,
    support: Vec<Vec<usize>>,
}

impl LogitGaussianPrior {
    /// Uses the same per-successor `mean` and `sd` (length S) for every cell.
    pub fn broadcast(mdp: &TabularMDP, mean: &[f64], sd: &[f64]) -> Result<Self> {
        let s = mdp.num_states();
        if mean.len() != s || sd.len() != s {
            return invalid("logit prior vectors need one entry per state");
        }
        if mean.iter().chain(sd).any(|x| !x.is_finite()) || sd.iter().any(|&x| x < 0.0) {
            return invalid("logit prior must be finite with non-negative standard deviations");
        }
        let cells = mdp.num_cells();
        Ok(Self {
            num_states: s,
            num_actions: mdp.num_actions(),
            mean: mean.repeat(cells),
            sd: sd.repeat(cells),
            support: (0..cells).map(|c| mdp.support(c).to_vec()).collect(),
        })
    }

    fn row<'a>(&self, table: &'a [f64], cell: usize) -> &'a [f64] {
        &table[cell * self.num_states..(cell + 1) * self.num_states]
    }
}

fn softmax_into(logits: &[f64], support: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (&j, &l) in support.iter().zip(logits) {
        out[j] = (l - max).exp();
        sum += out[j];
    }
    support.iter().for_each(|&j| out[j] /= sum);
}

fn log_softmax_likelihood(logits: &[f64], counts: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().zip(counts).map(|(l, c)| c * (l - log_norm)).sum()
}

/// Posterior over softmax-parameterised rows under a Gaussian logit prior and
/// a categorical likelihood, sampled by adaptive random-walk Metropolis-Hastings
/// independently per cell. The mean is the sample mean.
pub fn gaussian_logit_posterior(
    prior: &LogitGaussianPrior,
    data: &TransitionDataset,
    m: usize,
    chain_length: usize,
    seed: u64,
) -> Result<PosteriorSampleSet> {
    if m == 0 {
        return invalid("at least one posterior sample is required");
    }
    if chain_length < m {
        return invalid(format!("chain length {chain_length} is shorter than the {m} requested samples"));
    }
    if data.num_states() != prior.num_states || data.num_actions() != prior.num_actions {
        return invalid("dataset and prior shapes differ");
    }
    let s = prior.num_states;
    let settings = ChainSettings::new(chain_length);
    let mut cells = Vec::with_capacity(prior.support.len());
    let mut warnings = Vec::new();
    for (cell, support) in prior.support.iter().enumerate() {
        let mut buf = vec![0.0; m * s];
        if support.len() == 1 {
            buf.chunks_mut(s).for_each(|row| row[support[0]] = 1.0);
            cells.push(buf);
            continue;
        }
        let mu: Vec<f64> = support.iter().map(|&j| prior.row(&prior.mean, cell)[j]).collect();
        let sd: Vec<f64> = support.iter().map(|&j| prior.row(&prior.sd, cell)[j]).collect();
        let counts: Vec<f64> = support.iter().map(|&j| data.counts(cell)[j] as f64).collect();
        let log_density = |theta: &[f64]| {
            let mut lp = 0.0;
            for ((t, m), s) in theta.iter().zip(&mu).zip(&sd) {
                if *s > 0.0 {
                    lp -= 0.5 * ((t - m) / s).powi(2);
                }
            }
            lp + log_softmax_likelihood(theta, &counts)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[cell as u64]));
        let out = RandomWalk::new(sd.clone()).run(mu.clone(), m, settings, log_density, &mut rng);
        if !(0.05..=0.95).contains(&out.acceptance) {
            warnings.push(format!("cell {cell}: acceptance rate {:.3} outside [0.05, 0.95]", out.acceptance));
        }
        for (row, theta) in buf.chunks_mut(s).zip(&out.draws) {
            softmax_into(theta, support, row);
        }
        cells.push(buf);
    }
    let mut set = PosteriorSampleSet::from_cells(s, prior.num_actions, m, cells, None)?;
    warnings.into_iter().for_each(|w| set.push_warning(w));
    Ok(set)
}
