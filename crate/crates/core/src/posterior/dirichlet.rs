use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{PosteriorSampleSet, TransitionDataset};
use crate::error::{invalid, Result};
use crate::mdp::TabularMDP;
use crate::seed::derive;

/// Independent Dirichlet priors, one concentration vector per cell. Zero
/// entries mark structurally impossible successors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    num_states: usize,
    num_actions: usize,
    alpha: Vec<f64>,
}

impl DirichletPrior {
    pub fn new(num_states: usize, num_actions: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != num_states * num_actions * num_states {
            return invalid("concentration table has the wrong size");
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return invalid("concentrations must be finite and non-negative");
        }
        if alpha.chunks(num_states).any(|row| row.iter().all(|&a| a == 0.0)) {
            return invalid("every cell needs at least one positive concentration");
        }
        Ok(Self { num_states, num_actions, alpha })
    }

    /// `value` on every successor in the MDP's structural support.
    pub fn symmetric(mdp: &TabularMDP, value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return invalid("symmetric concentration must be positive");
        }
        let s = mdp.num_states();
        let mut alpha = vec![0.0; mdp.num_cells() * s];
        for cell in 0..mdp.num_cells() {
            for &j in mdp.support(cell) {
                alpha[cell * s + j] = value;
            }
        }
        Self::new(s, mdp.num_actions(), alpha)
    }

    pub fn alpha(&self, cell: usize) -> &[f64] {
        &self.alpha[cell * self.num_states..(cell + 1) * self.num_states]
    }
}

/// One Dirichlet draw computed in log space, so small concentrations do not
/// underflow to an all-zero vector.
pub(crate) fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R, out: &mut [f64]) {
    let mut max_log = f64::NEG_INFINITY;
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = if a > 0.0 {
            let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / a
        } else {
            f64::NEG_INFINITY
        };
        max_log = max_log.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max_log).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Conjugate update: each cell's posterior is `Dirichlet(alpha + counts)`.
/// The reported mean is the analytic posterior mean.
pub fn dirichlet_posterior(
    prior: &DirichletPrior,
    data: &TransitionDataset,
    m: usize,
    seed: u64,
) -> Result<PosteriorSampleSet> {
    if m == 0 {
        return invalid("at least one posterior sample is required");
    }
    if data.num_states() != prior.num_states || data.num_actions() != prior.num_actions {
        return invalid("dataset and prior shapes differ");
    }
    let s = prior.num_states;
    let cells = prior.num_states * prior.num_actions;
    let mut samples = Vec::with_capacity(cells);
    let mut means = Vec::with_capacity(cells);
    for cell in 0..cells {
        let posterior: Vec<f64> = prior.alpha(cell).iter().zip(data.counts(cell)).map(|(a, &c)| a + c as f64).collect();
        let total: f64 = posterior.iter().sum();
        means.push(posterior.iter().map(|a| a / total).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[cell as u64]));
        let mut buf = vec![0.0; m * s];
        for row in buf.chunks_mut(s) {
            sample_dirichlet(&posterior, &mut rng, row);
        }
        samples.push(buf);
    }
    PosteriorSampleSet::from_cells(s, prior.num_actions, m, samples, Some(means))
}
