//! Invasive-species population model.
//!
//! The population evolves as `N' = min(lambda N, K)` with growth rate
//! `lambda = lambda_bar - z (N beta1 + max(0, N - N_bar)^2 beta2) + noise`,
//! where `z` indicates the control action. The MDP state is the binned
//! population observation `y' = N' + noise_y`.
//!
//! Transition rows are computed deterministically: the growth noise is
//! integrated with stratified normal quantiles and the observation noise with
//! the normal CDF over bin edges. Rows for a grid of mean growth rates are
//! tabulated once and linearly interpolated, which keeps posterior sampling
//! over the growth parameters cheap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};
use statrs::function::erf::erfc;

use super::mcmc::{ChainSettings, RandomWalk};
use super::{PosteriorSampleSet, TransitionDataset};
use crate::error::{invalid, Result};
use crate::mdp::TransitionModel;
use crate::seed::derive;

/// Action index of "apply control"; action 0 is "do nothing".
pub const CONTROL: usize = 1;
const TAIL_SIGMAS: f64 = 9.0;
const LIKELIHOOD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationModelParams {
    pub lambda_bar: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub n_bar: f64,
    /// Carrying capacity K.
    pub capacity: f64,
    pub sigma_lambda: f64,
    pub sigma_y: f64,
}

impl Default for PopulationModelParams {
    fn default() -> Self {
        Self {
            lambda_bar: 1.2,
            beta1: 0.002,
            beta2: 0.00005,
            n_bar: 300.0,
            capacity: 1000.0,
            sigma_lambda: 0.1,
            sigma_y: 20.0,
        }
    }
}

impl PopulationModelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_bar, self.beta1, self.beta2, self.n_bar, self.capacity, self.sigma_lambda, self.sigma_y];
        if all.iter().any(|x| !x.is_finite()) {
            return invalid("population parameters must be finite");
        }
        if self.capacity <= 0.0 {
            return invalid("carrying capacity must be positive");
        }
        if self.sigma_lambda < 0.0 || self.sigma_y < 0.0 {
            return invalid("noise levels must be non-negative");
        }
        Ok(())
    }

    /// Expected growth rate at population `n`.
    pub fn growth_mean(&self, n: f64, control: bool) -> f64 {
        if control {
            self.lambda_bar - n * self.beta1 - (n - self.n_bar).max(0.0).powi(2) * self.beta2
        } else {
            self.lambda_bar
        }
    }
}

/// Prior over the uncertain growth parameters; the remaining fields of
/// `mean` are treated as known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesPrior {
    pub mean: PopulationModelParams,
    pub sd_lambda_bar: f64,
    pub sd_beta1: f64,
    pub sd_beta2: f64,
}

impl Default for SpeciesPrior {
    fn default() -> Self {
        Self { mean: PopulationModelParams::default(), sd_lambda_bar: 0.2, sd_beta1: 0.001, sd_beta2: 0.000025 }
    }
}

impl SpeciesPrior {
    fn location(&self) -> [f64; 3] {
        [self.mean.lambda_bar, self.mean.beta1, self.mean.beta2]
    }

    fn scales(&self) -> [f64; 3] {
        [self.sd_lambda_bar, self.sd_beta1, self.sd_beta2]
    }

    fn with_growth(&self, theta: &[f64]) -> PopulationModelParams {
        PopulationModelParams { lambda_bar: theta[0], beta1: theta[1], beta2: theta[2], ..self.mean }
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.location()
            .iter()
            .zip(self.scales())
            .zip(theta)
            .map(|((m, s), t)| if s > 0.0 { -0.5 * ((t - m) / s).powi(2) } else { 0.0 })
            .sum()
    }
}

/// Numerical resolution of the transition-row computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolution {
    /// Stratified quadrature nodes for the growth noise.
    pub quadrature_nodes: usize,
    /// Upper end of the tabulated mean-growth grid.
    pub mu_max: f64,
    /// Spacing of the tabulated mean-growth grid.
    pub mu_step: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { quadrature_nodes: 256, mu_max: 3.0, mu_step: 0.005 }
    }
}

struct MuGrid {
    lo: f64,
    step: f64,
    len: usize,
    /// bin-major: bin, grid point, successor.
    rows: Vec<f64>,
}

/// Discretised population dynamics over `bins` evenly spaced population levels
/// `0, K/(bins-1), ..., K`.
pub struct SpeciesDynamics {
    bins: usize,
    capacity: f64,
    sigma_lambda: f64,
    sigma_y: f64,
    nodes: Vec<f64>,
    edges: Vec<f64>,
    grid: Option<MuGrid>,
}

impl std::fmt::Debug for SpeciesDynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpeciesDynamics")
            .field("bins", &self.bins)
            .field("capacity", &self.capacity)
            .field("sigma_lambda", &self.sigma_lambda)
            .field("sigma_y", &self.sigma_y)
            .field("tabulated", &self.grid.is_some())
            .finish()
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl SpeciesDynamics {
    pub fn new(params: &PopulationModelParams, bins: usize, resolution: Resolution) -> Result<Self> {
        params.validate()?;
        if bins < 2 {
            return invalid(format!("need at least 2 population bins, got {bins}"));
        }
        if resolution.quadrature_nodes == 0 || resolution.mu_step.is_nan() || resolution.mu_step <= 0.0 {
            return invalid("quadrature resolution must be positive");
        }
        let q = resolution.quadrature_nodes;
        let std = StatNormal::new(0.0, 1.0).expect("standard normal");
        let nodes: Vec<f64> = (0..q).map(|i| std.inverse_cdf((i as f64 + 0.5) / q as f64)).collect();
        let width = params.capacity / (bins - 1) as f64;
        let edges = (0..bins - 1).map(|b| (b as f64 + 0.5) * width).collect();
        let mut dynamics = Self {
            bins,
            capacity: params.capacity,
            sigma_lambda: params.sigma_lambda,
            sigma_y: params.sigma_y,
            nodes,
            edges,
            grid: None,
        };
        if params.sigma_lambda > 0.0 {
            let lo = -params.sigma_lambda * dynamics.nodes[q - 1];
            if resolution.mu_max > lo {
                let len = ((resolution.mu_max - lo) / resolution.mu_step).ceil() as usize + 1;
                let mut rows = vec![0.0; bins * len * bins];
                for (k, chunk) in rows.chunks_mut(bins).enumerate() {
                    let (bin, g) = (k / len, k % len);
                    dynamics.exact_row(bin, lo + g as f64 * resolution.mu_step, chunk);
                }
                dynamics.grid = Some(MuGrid { lo, step: resolution.mu_step, len, rows });
            }
        }
        Ok(dynamics)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Representative population of a bin.
    pub fn population(&self, bin: usize) -> f64 {
        self.capacity * bin as f64 / (self.bins - 1) as f64
    }

    pub fn bin_of(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x)
    }

    /// Adds `weight` times the observation-noise distribution around `x`.
    fn add_noise_row(&self, x: f64, weight: f64, out: &mut [f64]) {
        if self.sigma_y == 0.0 {
            out[self.bin_of(x)] += weight;
            return;
        }
        let lo = x - TAIL_SIGMAS * self.sigma_y;
        let hi = x + TAIL_SIGMAS * self.sigma_y;
        let mut prev_cdf = 0.0;
        for (b, &e) in self.edges.iter().enumerate() {
            let cdf = if e < lo {
                0.0
            } else if e > hi {
                1.0
            } else {
                std_normal_cdf((e - x) / self.sigma_y)
            };
            out[b] += weight * (cdf - prev_cdf);
            prev_cdf = cdf;
            if e > hi {
                break;
            }
        }
        if prev_cdf < 1.0 {
            // Mass above the last evaluated edge; only reachable when the loop ran to the end.
            if self.edges.last().is_some_and(|&e| e <= hi) {
                out[self.bins - 1] += weight * (1.0 - prev_cdf);
            }
        }
    }

    /// Row computed by quadrature over the growth noise, no tabulation.
    pub fn exact_row(&self, bin: usize, mu: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let n = self.population(bin);
        if n == 0.0 || self.sigma_lambda == 0.0 {
            self.add_noise_row((mu * n).clamp(0.0, self.capacity), 1.0, out);
        } else {
            let w = 1.0 / self.nodes.len() as f64;
            let (mut at_zero, mut at_cap) = (0usize, 0usize);
            for &z in &self.nodes {
                let x = (mu + self.sigma_lambda * z) * n;
                if x <= 0.0 {
                    at_zero += 1;
                } else if x >= self.capacity {
                    at_cap += 1;
                } else {
                    self.add_noise_row(x, w, out);
                }
            }
            if at_zero > 0 {
                self.add_noise_row(0.0, w * at_zero as f64, out);
            }
            if at_cap > 0 {
                self.add_noise_row(self.capacity, w * at_cap as f64, out);
            }
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= sum);
    }

    /// Transition row of `bin` under mean growth rate `mu`.
    pub fn row_into(&self, bin: usize, mu: f64, out: &mut [f64]) {
        if let Some(grid) = &self.grid {
            let pos = (mu - grid.lo) / grid.step;
            if pos >= 0.0 && pos <= (grid.len - 1) as f64 && self.population(bin) > 0.0 {
                let g = (pos.floor() as usize).min(grid.len - 2);
                let t = pos - g as f64;
                let base = (bin * grid.len + g) * self.bins;
                let (a, b) = grid.rows[base..base + 2 * self.bins].split_at(self.bins);
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o = (1.0 - t) * x + t * y;
                }
                return;
            }
        }
        self.exact_row(bin, mu, out);
    }

    fn check_params(&self, params: &PopulationModelParams) -> Result<()> {
        params.validate()?;
        if params.capacity != self.capacity || params.sigma_lambda != self.sigma_lambda || params.sigma_y != self.sigma_y {
            return invalid("parameters disagree with the tabulated dynamics (capacity or noise levels)");
        }
        Ok(())
    }

    fn rows_into(&self, params: &PopulationModelParams, out: &mut [f64]) {
        let s = self.bins;
        for (cell, row) in out.chunks_mut(s).enumerate() {
            let (bin, action) = (cell / 2, cell % 2);
            let mu = params.growth_mean(self.population(bin), action == CONTROL);
            self.row_into(bin, mu, row);
        }
    }

    /// Full two-action transition model under `params`.
    pub fn model(&self, params: &PopulationModelParams) -> Result<TransitionModel> {
        self.check_params(params)?;
        let mut probs = vec![0.0; 2 * self.bins * self.bins];
        self.rows_into(params, &mut probs);
        TransitionModel::new(self.bins, 2, probs)
    }
}

/// Posterior over the growth parameters `(lambda_bar, beta1, beta2)` given
/// binned transitions, sampled by random-walk Metropolis-Hastings; each
/// parameter draw is mapped through the dynamics to a full transition model.
/// With no data the draws come straight from the prior.
pub fn species_posterior(
    prior: &SpeciesPrior,
    dynamics: &SpeciesDynamics,
    data: &TransitionDataset,
    m: usize,
    settings: ChainSettings,
    seed: u64,
) -> Result<PosteriorSampleSet> {
    if m == 0 {
        return invalid("at least one posterior sample is required");
    }
    dynamics.check_params(&prior.mean)?;
    let s = dynamics.bins;
    if data.num_states() != s || data.num_actions() != 2 {
        return invalid("dataset shape does not match the population bins");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[0]));
    let draws: Vec<Vec<f64>> = if data.is_empty() {
        let normals: Vec<Normal<f64>> = prior
            .location()
            .iter()
            .zip(prior.scales())
            .map(|(&m, sd)| Normal::new(m, sd).expect("finite prior"))
            .collect();
        (0..m).map(|_| normals.iter().map(|n| n.sample(&mut rng)).collect()).collect()
    } else {
        if settings.chain_length < m {
            return invalid(format!("chain length {} is shorter than the {m} requested samples", settings.chain_length));
        }
        let observed: Vec<(usize, Vec<(usize, f64)>)> = (0..data.num_cells())
            .filter(|&c| data.total(c) > 0)
            .map(|c| {
                let counts = data.counts(c).iter().enumerate().filter(|(_, &n)| n > 0).map(|(j, &n)| (j, n as f64));
                (c, counts.collect())
            })
            .collect();
        let mut row = vec![0.0; s];
        let log_density = |theta: &[f64]| {
            let params = prior.with_growth(theta);
            let mut lp = prior.log_density(theta);
            for (cell, counts) in &observed {
                let bin = cell / 2;
                let mu = params.growth_mean(dynamics.population(bin), cell % 2 == CONTROL);
                dynamics.row_into(bin, mu, &mut row);
                lp += counts.iter().map(|&(j, n)| n * row[j].max(LIKELIHOOD_FLOOR).ln()).sum::<f64>();
            }
            lp
        };
        let walk = RandomWalk::new(prior.scales().to_vec());
        walk.run(prior.location().to_vec(), m, settings, log_density, &mut rng).draws
    };

    let block = m * s;
    let mut cells = vec![vec![0.0; block]; 2 * s];
    let mut model = vec![0.0; 2 * s * s];
    for (j, theta) in draws.iter().enumerate() {
        dynamics.rows_into(&prior.with_growth(theta), &mut model);
        for (cell, row) in model.chunks(s).enumerate() {
            cells[cell][j * s..(j + 1) * s].copy_from_slice(row);
        }
    }
    PosteriorSampleSet::from_cells(s, 2, m, cells, None)
}
