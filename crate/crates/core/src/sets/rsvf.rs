//! Value-function-guided set construction.
//!
//! Each cell's set is the smallest L1 ball that touches, for every value
//! function `v` collected so far, the hyperplane `v' p = g(v)` at the lower
//! posterior quantile of `v' p`. The loop adds the latest robust value
//! function until every cell passes the empirical safety check.

use serde::{Deserialize, Serialize};

use super::bci::build_bci;
use super::ConfidenceBudget;
use crate::error::{invalid, Result};
use crate::geometry::{min_radius_center_near, worst_case_l1, HyperplaneTarget, L1AmbiguitySet};
use crate::mdp::{dot, TabularMDP, ValueFunction};
use crate::posterior::{CellSamples, PosteriorSampleSet};
use crate::robust::{solve_robust, AmbiguousMDP, RobustSolution};

const DEDUP_TOL: f64 = 1e-7;
const CHECK_TOL: f64 = 1e-9;

/// Lower empirical quantile of `v' p`: the `floor(per_cell * m)`-th smallest
/// value (0-based), so at most `per_cell * m` samples fall strictly below it.
pub fn hyperplane_level(samples: CellSamples<'_>, v: &ValueFunction, per_cell: f64) -> Result<f64> {
    let m = samples.len();
    if m == 0 {
        return invalid("empty sample set");
    }
    if v.len() != samples.dim() {
        return invalid(format!("value has {} entries, samples have dimension {}", v.len(), samples.dim()));
    }
    let mut values: Vec<f64> = samples.iter().map(|p| dot(p, v.as_slice())).collect();
    values.sort_by(f64::total_cmp);
    let k = ((per_cell * m as f64 + 1e-9).floor() as usize).min(m - 1);
    Ok(values[k])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsvfOptions<'a> {
    pub max_iters: usize,
    /// Independent posterior samples for the safety check; the construction
    /// samples are reused when absent.
    pub verification: Option<&'a PosteriorSampleSet>,
}

impl Default for RsvfOptions<'_> {
    fn default() -> Self {
        Self { max_iters: 20, verification: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ConditionSatisfied,
    BciFallback,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvfIteration {
    pub value: ValueFunction,
    pub radii: Vec<f64>,
    pub safe_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvfTrace {
    pub iterations: Vec<RsvfIteration>,
    pub terminated_by: Termination,
    pub bci_safe_return: f64,
    /// Number of value functions guiding the final sets.
    pub value_set_size: usize,
    /// Whether the safety check held for every collected value function at
    /// termination, not only the latest one.
    pub full_condition_held: bool,
}

impl RsvfTrace {
    /// Largest increase of the recorded safe return between consecutive passes.
    pub fn max_increase(&self) -> f64 {
        self.iterations.windows(2).map(|w| w[1].safe_return - w[0].safe_return).fold(0.0, f64::max)
    }
}

/// Sorted union of the successors any sample or the mean can reach.
fn sample_support(samples: CellSamples<'_>, mean: &[f64]) -> Vec<usize> {
    (0..samples.dim()).filter(|&j| mean[j] > 0.0 || samples.iter().any(|p| p[j] > 0.0)).collect()
}

fn cell_set(samples: CellSamples<'_>, mean: &[f64], values: &[ValueFunction], per_cell: f64) -> Result<L1AmbiguitySet> {
    if samples.is_degenerate() {
        let point = samples.get(0).to_vec();
        let support: Vec<usize> = (0..point.len()).filter(|&j| point[j] > 0.0).collect();
        return L1AmbiguitySet::new(point, 0.0)?.with_support(&support);
    }
    let support = sample_support(samples, mean);
    let restrict = |x: &[f64]| support.iter().map(|&j| x[j]).collect::<Vec<f64>>();
    let targets = values
        .iter()
        .map(|v| {
            let level = hyperplane_level(samples, v, per_cell)?;
            Ok(HyperplaneTarget::new(ValueFunction(restrict(v.as_slice())), level))
        })
        .collect::<Result<Vec<_>>>()?;
    let (local, radius) = min_radius_center_near(&targets, &restrict(mean))?;
    let mut center = vec![0.0; samples.dim()];
    support.iter().zip(local).for_each(|(&j, x)| center[j] = x);
    L1AmbiguitySet::new(center, radius)?.with_support(&support)
}

/// Cell passes when at most `floor(per_cell * m)` samples have `p' v` below
/// the worst case of the set.
fn condition_holds(set: &L1AmbiguitySet, samples: CellSamples<'_>, v: &ValueFunction, per_cell: f64) -> Result<bool> {
    let (worst, _) = worst_case_l1(set, v)?;
    let tol = CHECK_TOL * v.0.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let failures = samples.iter().filter(|p| worst > dot(p, v.as_slice()) + tol).count();
    Ok(failures as f64 <= (per_cell * samples.len() as f64 + 1e-9).floor())
}

fn condition_everywhere(amdp: &AmbiguousMDP, check: &PosteriorSampleSet, v: &ValueFunction, per_cell: f64) -> Result<bool> {
    for (cell, set) in amdp.sets().iter().enumerate() {
        if !condition_holds(set, check.cell(cell), v, per_cell)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Iterative value-function-guided construction with the BCI solution as a
/// floor: whenever a pass returns less than BCI, or the pass budget runs out,
/// the BCI solution is returned instead.
pub fn build_rsvf(
    mdp: &TabularMDP,
    posterior: &PosteriorSampleSet,
    budget: ConfidenceBudget,
    options: &RsvfOptions<'_>,
) -> Result<(RobustSolution, RsvfTrace)> {
    if options.max_iters == 0 {
        return invalid("max_iters must be at least 1");
    }
    posterior.check_shape(mdp.num_states(), mdp.num_actions())?;
    let check = options.verification.unwrap_or(posterior);
    check.check_shape(mdp.num_states(), mdp.num_actions())?;
    let per_cell = budget.per_cell();

    let bci = solve_robust(&build_bci(mdp, posterior, budget)?)?;
    let seed = solve_robust(&AmbiguousMDP::nominal(mdp.clone(), &posterior.mean_model())?)?;
    let mut values = vec![seed.value];
    let mut iterations = Vec::new();

    loop {
        let sets = (0..mdp.num_cells())
            .map(|cell| cell_set(posterior.cell(cell), posterior.mean_row(cell), &values, per_cell))
            .collect::<Result<Vec<_>>>()?;
        let amdp = AmbiguousMDP::new(mdp.clone(), sets)?;
        let sol = solve_robust(&amdp)?;
        iterations.push(RsvfIteration { value: sol.value.clone(), radii: amdp.radii(), safe_return: sol.safe_return });

        let outcome = if sol.safe_return < bci.safe_return - CHECK_TOL * bci.safe_return.abs().max(1.0) {
            Some(Termination::BciFallback)
        } else if condition_everywhere(&amdp, check, &sol.value, per_cell)? {
            Some(Termination::ConditionSatisfied)
        } else if iterations.len() >= options.max_iters || values.iter().any(|v| v.sup_distance(&sol.value) <= DEDUP_TOL) {
            // A repeated value function cannot change the sets on another pass.
            Some(Termination::IterationCap)
        } else {
            None
        };
        let Some(terminated_by) = outcome else {
            values.push(sol.value);
            continue;
        };
        let mut full_condition_held = true;
        for v in &values {
            full_condition_held &= condition_everywhere(&amdp, check, v, per_cell)?;
        }
        let trace = RsvfTrace {
            iterations,
            terminated_by,
            bci_safe_return: bci.safe_return,
            value_set_size: values.len(),
            full_condition_held,
        };
        let chosen = if terminated_by == Termination::ConditionSatisfied { sol } else { bci };
        return Ok((chosen, trace));
    }
}
