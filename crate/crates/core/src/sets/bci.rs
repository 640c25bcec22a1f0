use super::ConfidenceBudget;
use crate::error::{Error, Result};
use crate::geometry::{l1_distance, L1AmbiguitySet};
use crate::mdp::TabularMDP;
use crate::posterior::{CellSamples, PosteriorSampleSet};
use crate::robust::AmbiguousMDP;

/// Number of samples allowed strictly outside a set: the largest integer
/// strictly below `per_cell * m`.
pub(crate) fn allowed_outside(per_cell: f64, m: usize) -> usize {
    let budget = per_cell * m as f64;
    let nearest = budget.round();
    let ceil = if (budget - nearest).abs() <= 1e-9 * budget.max(1.0) { nearest } else { budget.ceil() };
    (ceil as usize).saturating_sub(1)
}

/// Smallest radius around `center` leaving strictly fewer than `per_cell * m`
/// samples outside.
pub fn bci_radius(samples: CellSamples<'_>, center: &[f64], per_cell: f64) -> Result<f64> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    if per_cell >= 1.0 {
        return Ok(0.0);
    }
    let mut d = samples.iter().map(|row| l1_distance(row, center)).collect::<Result<Vec<_>>>()?;
    d.sort_by(f64::total_cmp);
    let allowed = allowed_outside(per_cell, m).min(m - 1);
    Ok(d[m - 1 - allowed])
}

/// Smallest posterior credible L1 ball around the posterior mean of each cell.
pub fn build_bci(mdp: &TabularMDP, posterior: &PosteriorSampleSet, budget: ConfidenceBudget) -> Result<AmbiguousMDP> {
    posterior.check_shape(mdp.num_states(), mdp.num_actions())?;
    let required = budget.required_samples();
    if posterior.sample_count() < required {
        return Err(Error::InsufficientSamples { required, got: posterior.sample_count() });
    }
    let sets = (0..mdp.num_cells())
        .map(|cell| {
            let mean = posterior.mean_row(cell);
            let radius = bci_radius(posterior.cell(cell), mean, budget.per_cell())?;
            L1AmbiguitySet::new(mean.to_vec(), radius)
        })
        .collect::<Result<Vec<_>>>()?;
    AmbiguousMDP::new(mdp.clone(), sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_samples(first: &[f64]) -> Vec<f64> {
        first.iter().flat_map(|&x| [x, 1.0 - x]).collect()
    }

    #[test]
    fn order_statistic_leaves_fewer_than_budget_outside() {
        // Distances to (1, 0) are 2(1 - x) = 0.01 j.
        let buf = two_state_samples(&(1..=100).map(|j| 1.0 - 0.005 * j as f64).collect::<Vec<_>>());
        let samples = CellSamples::new(&buf, 2).unwrap();
        let psi = bci_radius(samples, &[1.0, 0.0], 0.05).unwrap();
        assert!((psi - 0.96).abs() < 1e-12, "{psi}");
        let outside = samples.iter().filter(|r| l1_distance(r, &[1.0, 0.0]).unwrap() > psi).count();
        assert_eq!(outside, 4);
    }

    #[test]
    fn allowance_rounds_down_strictly() {
        assert_eq!(allowed_outside(0.05, 100), 4);
        assert_eq!(allowed_outside(0.05, 101), 5);
        assert_eq!(allowed_outside(0.05, 20), 0);
        assert_eq!(allowed_outside(0.1, 30), 2);
        assert_eq!(allowed_outside(0.001, 100), 0);
    }

    #[test]
    fn degenerate_and_vacuous_cases() {
        let buf = two_state_samples(&[0.3; 10]);
        let samples = CellSamples::new(&buf, 2).unwrap();
        assert_eq!(bci_radius(samples, &[0.3, 0.7], 0.1).unwrap(), 0.0);
        let buf = two_state_samples(&[0.0, 1.0]);
        let samples = CellSamples::new(&buf, 2).unwrap();
        assert_eq!(bci_radius(samples, &[0.5, 0.5], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_samples_reported() {
        let mdp = TabularMDP::new(2, 1, vec![0.0, 1.0], 0.9, vec![1.0, 0.0]).unwrap();
        let cells = vec![two_state_samples(&[0.5; 10]), two_state_samples(&[0.5; 10])];
        let post = PosteriorSampleSet::from_cells(2, 1, 10, cells, None).unwrap();
        let budget = ConfidenceBudget::new(0.05, 2).unwrap();
        assert_eq!(build_bci(&mdp, &post, budget).unwrap_err(), Error::InsufficientSamples { required: 40, got: 10 });
    }
}
