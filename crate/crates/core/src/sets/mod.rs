//! Ambiguity-set constructions from data or posterior samples.

mod bci;
mod hoeffding;
mod rsvf;

pub use bci::{bci_radius, build_bci};
pub use hoeffding::{build_hoeffding, hoeffding_radius};
pub use rsvf::{build_rsvf, hyperplane_level, RsvfIteration, RsvfOptions, RsvfTrace, Termination};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::TabularMDP;
use crate::posterior::PosteriorSampleSet;
use crate::robust::{solve_robust, AmbiguousMDP, RobustSolution};

/// Overall failure probability `delta` split evenly over `cells` uncertain
/// state-action pairs by the union bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBudget {
    delta: f64,
    cells: usize,
    per_cell: f64,
}

impl ConfidenceBudget {
    pub fn new(delta: f64, cells: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta {delta} must lie in (0, 1)"));
        }
        if cells == 0 {
            return invalid("confidence budget needs at least one cell");
        }
        Ok(Self { delta, cells, per_cell: delta / cells as f64 })
    }

    /// Splits `delta` over the cells of `mdp` whose successor is uncertain;
    /// cells with a single structural successor need no share. With full
    /// supports this is `delta / (S A)`.
    pub fn for_mdp(delta: f64, mdp: &TabularMDP) -> Result<Self> {
        Self::new(delta, mdp.uncertain_cells().max(1))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn per_cell(&self) -> f64 {
        self.per_cell
    }

    /// Samples needed for a per-cell quantile to be resolvable.
    pub fn required_samples(&self) -> usize {
        if self.per_cell >= 1.0 {
            1
        } else {
            (1.0 / self.per_cell - 1e-9).ceil() as usize
        }
    }
}

/// Nominal solve at the posterior mean; the returned `safe_return` is the
/// nominal return and carries no guarantee.
pub fn build_mean(mdp: &TabularMDP, posterior: &PosteriorSampleSet) -> Result<RobustSolution> {
    posterior.check_shape(mdp.num_states(), mdp.num_actions())?;
    solve_robust(&AmbiguousMDP::nominal(mdp.clone(), &posterior.mean_model())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{solve_nominal, TransitionModel};

    #[test]
    fn budget_splits_evenly() {
        let b = ConfidenceBudget::new(0.05, 10).unwrap();
        assert_eq!(b.per_cell(), 0.005);
        assert_eq!(b.required_samples(), 200);
        assert!(ConfidenceBudget::new(0.0, 3).is_err());
        assert!(ConfidenceBudget::new(1.0, 3).is_err());
        assert!(ConfidenceBudget::new(0.1, 0).is_err());
        let mdp = TabularMDP::new(3, 2, vec![0.0; 6], 0.9, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(ConfidenceBudget::for_mdp(0.06, &mdp).unwrap().per_cell(), 0.01);
    }

    #[test]
    fn mean_matches_nominal_solve() {
        let mdp = TabularMDP::new(2, 2, vec![1.0, 0.0, 0.5, 2.0], 0.9, vec![1.0, 0.0]).unwrap();
        let cells = vec![
            vec![0.9, 0.1, 0.5, 0.5],
            vec![0.2, 0.8, 0.4, 0.6],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.3, 0.7, 0.3, 0.7],
        ];
        let post = PosteriorSampleSet::from_cells(2, 2, 2, cells, None).unwrap();
        let sol = build_mean(&mdp, &post).unwrap();
        let (policy, value) = solve_nominal(&mdp, &post.mean_model()).unwrap();
        assert_eq!(sol.policy, policy);
        assert_eq!(sol.value, value);
        let wrong = TransitionModel::from_rows(1, 1, vec![vec![1.0]]).unwrap();
        let post1 = PosteriorSampleSet::from_cells(1, 1, 1, vec![wrong.as_slice().to_vec()], None).unwrap();
        assert!(build_mean(&mdp, &post1).is_err());
    }
}
