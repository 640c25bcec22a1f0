//! Random-walk Metropolis-Hastings with proposal adaptation during burn-in.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const ADAPT_BATCH: usize = 50;

/// Chain length and adaptation target. The first half of the chain is
/// burn-in, during which the proposal scale is tuned; it is frozen afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub chain_length: usize,
    pub target_acceptance: f64,
}

impl ChainSettings {
    pub fn new(chain_length: usize) -> Self {
        Self { chain_length, target_acceptance: 0.3 }
    }

    pub fn burn_in(&self) -> usize {
        self.chain_length / 2
    }
}

/// Gaussian random-walk proposal with one base scale per coordinate. Zero
/// scales pin a coordinate.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    scales: Vec<f64>,
}

pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    /// Acceptance rate over the post-burn-in segment.
    pub acceptance: f64,
}

impl RandomWalk {
    pub fn new(scales: Vec<f64>) -> Self {
        Self { scales }
    }

    /// Runs the chain from `init` and returns `m` draws spread evenly over the
    /// post-burn-in segment.
    pub fn run<R, F>(&self, init: Vec<f64>, m: usize, settings: ChainSettings, mut log_density: F, rng: &mut R) -> ChainOutput
    where
        R: Rng,
        F: FnMut(&[f64]) -> f64,
    {
        let dim = self.scales.len();
        let burn_in = settings.burn_in();
        let kept = (settings.chain_length - burn_in).max(1);
        let mut multiplier = 2.38 / (dim.max(1) as f64).sqrt();
        let mut state = init;
        let mut current = log_density(&state);
        let mut proposal = state.clone();
        let mut batch_accepts = 0usize;
        let mut accepted_after = 0usize;
        let mut draws = Vec::with_capacity(m);
        let mut next_pick = 0usize;

        for step in 0..burn_in + kept {
            for ((p, s), &scale) in proposal.iter_mut().zip(&state).zip(&self.scales) {
                let z: f64 = rng.sample(StandardNormal);
                *p = s + multiplier * scale * z;
            }
            let candidate = log_density(&proposal);
            let log_u = (1.0 - rng.random::<f64>()).ln();
            let accept = candidate.is_finite() && (candidate >= current || log_u < candidate - current);
            if accept {
                state.copy_from_slice(&proposal);
                current = candidate;
            }
            if step < burn_in {
                batch_accepts += accept as usize;
                if (step + 1) % ADAPT_BATCH == 0 {
                    let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
                    multiplier *= (2.0 * (rate - settings.target_acceptance)).exp();
                    batch_accepts = 0;
                }
                continue;
            }
            accepted_after += accept as usize;
            let offset = step - burn_in;
            while draws.len() < m && next_pick * kept / m == offset {
                draws.push(state.clone());
                next_pick += 1;
            }
        }
        ChainOutput { draws, acceptance: accepted_after as f64 / kept as f64 }
    }
}
