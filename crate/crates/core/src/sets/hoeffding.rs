use super::ConfidenceBudget;
use crate::error::{invalid, Result};
use crate::geometry::{L1AmbiguitySet, MAX_RADIUS};
use crate::mdp::TabularMDP;
use crate::posterior::TransitionDataset;
use crate::robust::AmbiguousMDP;

/// `sqrt((2 / n) ln(2^k / per_cell))` for a row with `k` possible successors,
/// clamped to the full-simplex radius; `n = 0` gives the full simplex.
pub fn hoeffding_radius(n: u64, support_size: usize, per_cell: f64) -> f64 {
    if n == 0 {
        return MAX_RADIUS;
    }
    let log_term = support_size as f64 * std::f64::consts::LN_2 - per_cell.ln();
    ((2.0 / n as f64) * log_term).sqrt().min(MAX_RADIUS)
}

/// L1 sets around the empirical transition frequencies. Unvisited cells get
/// the full simplex over their support, nominally uniform.
pub fn build_hoeffding(mdp: &TabularMDP, data: &TransitionDataset, budget: ConfidenceBudget) -> Result<AmbiguousMDP> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if data.num_states() != s || data.num_actions() != a {
        return invalid("dataset shape does not match the MDP");
    }
    let mut sets = Vec::with_capacity(mdp.num_cells());
    for cell in 0..mdp.num_cells() {
        let support = mdp.support(cell);
        let nominal = data.empirical_row(cell).unwrap_or_else(|| {
            let mut row = vec![0.0; s];
            support.iter().for_each(|&j| row[j] = 1.0 / support.len() as f64);
            row
        });
        let radius = hoeffding_radius(data.total(cell), support.len(), budget.per_cell());
        sets.push(L1AmbiguitySet::new(nominal, radius)?.with_support(support)?);
    }
    AmbiguousMDP::new(mdp.clone(), sets)
}
