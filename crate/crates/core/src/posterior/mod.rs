//! Transition data and sampled posteriors over transition rows.

mod dirichlet;
mod logit;
mod mcmc;
mod species;

pub use dirichlet::{dirichlet_posterior, DirichletPrior};
pub use logit::{gaussian_logit_posterior, LogitGaussianPrior};
pub use mcmc::{ChainSettings, RandomWalk};
pub use species::{species_posterior, PopulationModelParams, Resolution, SpeciesDynamics, SpeciesPrior, CONTROL};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mdp::{check_simplex, TransitionModel};

/// Observed `(s, a, s')` transitions with derived per-cell counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    num_states: usize,
    num_actions: usize,
    triples: Vec<(usize, usize, usize)>,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl TransitionDataset {
    pub fn new(num_states: usize, num_actions: usize, triples: Vec<(usize, usize, usize)>) -> Result<Self> {
        let cells = num_states * num_actions;
        let mut counts = vec![0u64; cells * num_states];
        let mut totals = vec![0u64; cells];
        for &(s, a, next) in &triples {
            if s >= num_states || a >= num_actions || next >= num_states {
                return invalid(format!("transition ({s}, {a}, {next}) out of range"));
            }
            let cell = s * num_actions + a;
            counts[cell * num_states + next] += 1;
            totals[cell] += 1;
        }
        Ok(Self { num_states, num_actions, triples, counts, totals })
    }

    pub fn empty(num_states: usize, num_actions: usize) -> Self {
        Self::new(num_states, num_actions, Vec::new()).expect("empty dataset is valid")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_cells(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn counts(&self, cell: usize) -> &[u64] {
        &self.counts[cell * self.num_states..(cell + 1) * self.num_states]
    }

    /// `n_{s,a}` for a cell.
    pub fn total(&self, cell: usize) -> u64 {
        self.totals[cell]
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Empirical transition frequencies of a cell, `None` when it has no data.
    pub fn empirical_row(&self, cell: usize) -> Option<Vec<f64>> {
        let n = self.totals[cell];
        (n > 0).then(|| self.counts(cell).iter().map(|&c| c as f64 / n as f64).collect())
    }
}

/// Samples of one cell's transition row, `m` rows of length `dim`.
#[derive(Debug, Clone, Copy)]
pub struct CellSamples<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> CellSamples<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return invalid("sample buffer is not a whole number of rows");
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::Chunks<'a, f64> {
        self.data.chunks(self.dim)
    }

    /// True when every sample equals the first one.
    pub fn is_degenerate(&self) -> bool {
        let first = self.get(0);
        self.iter().all(|row| row == first)
    }
}

/// `m` posterior samples of every cell's transition row plus the posterior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSampleSet {
    num_states: usize,
    num_actions: usize,
    sample_count: usize,
    /// Cell-major: cell, then sample, then successor.
    samples: Vec<f64>,
    mean: Vec<f64>,
    warnings: Vec<String>,
}

impl PosteriorSampleSet {
    /// Builds a sample set from per-cell sample buffers. With `mean = None`
    /// the mean is the arithmetic mean of the samples.
    pub fn from_cells(
        num_states: usize,
        num_actions: usize,
        sample_count: usize,
        cells: Vec<Vec<f64>>,
        mean: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if sample_count == 0 {
            return invalid("at least one posterior sample per cell is required");
        }
        if cells.len() != num_states * num_actions {
            return invalid(format!("expected {} cells of samples, got {}", num_states * num_actions, cells.len()));
        }
        let mut samples = Vec::with_capacity(cells.len() * sample_count * num_states);
        for (cell, mut buf) in cells.into_iter().enumerate() {
            if buf.len() != sample_count * num_states {
                return invalid(format!("cell {cell} has {} values, expected {}", buf.len(), sample_count * num_states));
            }
            for row in buf.chunks_mut(num_states) {
                check_simplex(row).map_err(|e| Error::InvalidInput(format!("sample of cell {cell}: {e}")))?;
            }
            samples.extend_from_slice(&buf);
        }
        let mut set = Self { num_states, num_actions, sample_count, samples, mean: Vec::new(), warnings: Vec::new() };
        set.mean = match mean {
            Some(rows) => {
                if rows.len() != num_states * num_actions || rows.iter().any(|r| r.len() != num_states) {
                    return invalid("posterior mean has the wrong shape");
                }
                let mut flat = rows.concat();
                for row in flat.chunks_mut(num_states) {
                    check_simplex(row).map_err(|e| Error::InvalidInput(format!("posterior mean: {e}")))?;
                }
                flat
            }
            None => (0..num_states * num_actions).flat_map(|c| set.sample_mean(c)).collect(),
        };
        Ok(set)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_cells(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn cell(&self, cell: usize) -> CellSamples<'_> {
        let block = self.sample_count * self.num_states;
        CellSamples { data: &self.samples[cell * block..(cell + 1) * block], dim: self.num_states }
    }

    pub fn mean_row(&self, cell: usize) -> &[f64] {
        &self.mean[cell * self.num_states..(cell + 1) * self.num_states]
    }

    pub fn mean_model(&self) -> TransitionModel {
        TransitionModel::new(self.num_states, self.num_actions, self.mean.clone())
            .expect("posterior mean rows are validated on construction")
    }

    /// Arithmetic mean of the samples of a cell.
    pub fn sample_mean(&self, cell: usize) -> Vec<f64> {
        let samples = self.cell(cell);
        let mut mean = vec![0.0; self.num_states];
        for row in samples.iter() {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        let m = samples.len() as f64;
        mean.iter_mut().for_each(|x| *x /= m);
        mean
    }

    /// Sampler diagnostics, such as acceptance rates outside the healthy band.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, warning: String) {
        self.warnings.push(warning);
    }

    pub(crate) fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.num_states != num_states || self.num_actions != num_actions {
            return invalid(format!(
                "posterior is {}x{} but the MDP is {}x{}",
                self.num_states, self.num_actions, num_states, num_actions
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_counts_follow_triples() {
        let data = TransitionDataset::new(2, 2, vec![(0, 1, 1), (0, 1, 0), (0, 1, 1), (1, 0, 0)]).unwrap();
        assert_eq!(data.counts(1), &[1, 2]);
        assert_eq!(data.total(1), 3);
        assert_eq!(data.total(0), 0);
        assert_eq!(data.empirical_row(2), Some(vec![1.0, 0.0]));
        assert_eq!(data.empirical_row(0), None);
        assert!(TransitionDataset::new(2, 2, vec![(0, 2, 0)]).is_err());
    }

    #[test]
    fn sample_set_mean_and_validation() {
        let cells = vec![vec![1.0, 0.0, 0.0, 1.0]];
        let set = PosteriorSampleSet::from_cells(2, 1, 2, cells.clone(), None).unwrap_err();
        assert!(matches!(set, Error::InvalidInput(_)));
        let cells = vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.5, 0.5, 0.5]];
        let set = PosteriorSampleSet::from_cells(2, 1, 2, cells, None).unwrap();
        assert_eq!(set.mean_row(0), &[0.5, 0.5]);
        assert!(set.cell(1).is_degenerate());
        assert!(!set.cell(0).is_degenerate());
        let bad = vec![vec![0.9, 0.0, 0.0, 1.0], vec![0.5, 0.5, 0.5, 0.5]];
        assert!(PosteriorSampleSet::from_cells(2, 1, 2, bad, None).is_err());
    }
}
