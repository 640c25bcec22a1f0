//! Finite tabular MDPs, exact policy evaluation and nominal value iteration.
//!
//! State-action pairs are addressed by a flat cell index `s * A + a`; transition
//! rows are stored densely in that order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for a probability vector to count as lying on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Rows off the simplex by at most this much are renormalised instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-7;
/// Sweep cap for every value-iteration loop in the crate.
pub const MAX_SWEEPS: usize = 100_000;

/// Checks that `row` is a probability vector, repairing drift of at most
/// [`RENORMALIZE_TOL`] in place.
pub fn check_simplex(row: &mut [f64]) -> std::result::Result<(), String> {
    if row.is_empty() {
        return Err("empty probability vector".into());
    }
    let mut drifted = false;
    for x in row.iter_mut() {
        if !x.is_finite() {
            return Err(format!("non-finite probability {x}"));
        }
        if *x < 0.0 {
            if *x < -RENORMALIZE_TOL {
                return Err(format!("negative probability {x}"));
            }
            *x = 0.0;
            drifted = true;
        }
    }
    let sum: f64 = row.iter().sum();
    let err = (sum - 1.0).abs();
    if err > RENORMALIZE_TOL {
        return Err(format!("probabilities sum to {sum}"));
    }
    if drifted || err > SIMPLEX_TOL {
        row.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Finite MDP with known rewards.
///
/// Each cell may declare a structural support: the successor states that are
/// possible at all. Cells without a declaration may reach every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMDP {
    num_states: usize,
    num_actions: usize,
    rewards: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
    support: Vec<Vec<usize>>,
}

impl TabularMDP {
    /// `rewards` is indexed by cell, `s * num_actions + a`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        rewards: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return invalid("an MDP needs at least one state and one action");
        }
        if rewards.len() != num_states * num_actions {
            return invalid(format!(
                "expected {} rewards, got {}",
                num_states * num_actions,
                rewards.len()
            ));
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return invalid(format!("non-finite reward {r}"));
        }
        if !(0.0..1.0).contains(&discount) {
            return invalid(format!("discount {discount} outside [0, 1)"));
        }
        if initial_dist.len() != num_states {
            return invalid("initial distribution length differs from the state count");
        }
        let mut initial_dist = initial_dist;
        check_simplex(&mut initial_dist).map_err(|e| Error::InvalidInput(format!("initial distribution: {e}")))?;
        let full: Vec<usize> = (0..num_states).collect();
        Ok(Self {
            num_states,
            num_actions,
            rewards,
            discount,
            initial_dist,
            support: vec![full; num_states * num_actions],
        })
    }

    /// Restricts the successors of every cell. Each list must be non-empty and
    /// within range; duplicates are removed.
    pub fn with_support(mut self, support: Vec<Vec<usize>>) -> Result<Self> {
        if support.len() != self.num_cells() {
            return invalid(format!("expected {} support lists, got {}", self.num_cells(), support.len()));
        }
        let mut cleaned = Vec::with_capacity(support.len());
        for (cell, mut s) in support.into_iter().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() || s.iter().any(|&j| j >= self.num_states) {
                return invalid(format!("support of cell {cell} is empty or out of range"));
            }
            cleaned.push(s);
        }
        self.support = cleaned;
        Ok(self)
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

    pub fn cell(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[self.cell(state, action)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Possible successors of a cell, sorted ascending.
    pub fn support(&self, cell: usize) -> &[usize] {
        &self.support[cell]
    }

    pub fn has_full_support(&self, cell: usize) -> bool {
        self.support[cell].len() == self.num_states
    }

    /// Number of cells whose successor is uncertain (support larger than one state).
    pub fn uncertain_cells(&self) -> usize {
        self.support.iter().filter(|s| s.len() > 1).count()
    }

    /// Largest absolute reward.
    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// One probability vector over successor states per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionModel {
    /// `probs` holds `S * A` rows of length `S`, row-major by cell.
    pub fn new(num_states: usize, num_actions: usize, mut probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return invalid("a transition model needs at least one state and one action");
        }
        if probs.len() != num_states * num_actions * num_states {
            return invalid(format!(
                "expected {} transition probabilities, got {}",
                num_states * num_actions * num_states,
                probs.len()
            ));
        }
        for (cell, row) in probs.chunks_mut(num_states).enumerate() {
            check_simplex(row).map_err(|e| Error::InvalidInput(format!("transition row {cell}: {e}")))?;
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn from_rows(num_states: usize, num_actions: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != num_states) {
            return invalid("every transition row must have one entry per state");
        }
        Self::new(num_states, num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        self.cell_row(state * self.num_actions + action)
    }

    pub fn cell_row(&self, cell: usize) -> &[f64] {
        &self.probs[cell * self.num_states..(cell + 1) * self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    fn check_matches(&self, mdp: &TabularMDP) -> Result<()> {
        if self.num_states != mdp.num_states || self.num_actions != mdp.num_actions {
            return invalid(format!(
                "model is {}x{} but the MDP is {}x{}",
                self.num_states, self.num_actions, mdp.num_states, mdp.num_actions
            ));
        }
        Ok(())
    }
}

/// Stationary deterministic policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn check(&self, mdp: &TabularMDP) -> Result<()> {
        if self.0.len() != mdp.num_states {
            return invalid(format!("policy covers {} states, MDP has {}", self.0.len(), mdp.num_states));
        }
        if let Some(a) = self.0.iter().find(|&&a| a >= mdp.num_actions) {
            return invalid(format!("policy action {a} out of range"));
        }
        Ok(())
    }
}

/// State values in return units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_norm_diff(&self.0, &other.0)
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Solves `v = r_pi + gamma * P_pi v` by LU decomposition with one step of
/// iterative refinement.
pub fn evaluate_policy(mdp: &TabularMDP, policy: &Policy, model: &TransitionModel) -> Result<ValueFunction> {
    model.check_matches(mdp)?;
    policy.check(mdp)?;
    let n = mdp.num_states;
    let gamma = mdp.discount;
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = policy.action(s);
        rhs[s] = mdp.reward(s, a);
        for (j, p) in model.row(s, a).iter().enumerate() {
            system[(s, j)] -= gamma * p;
        }
    }
    let lu = system.clone().lu();
    let mut v = lu
        .solve(&rhs)
        .ok_or(Error::NumericalFailure { iterations: 0, residual: f64::INFINITY })?;
    let residual = &rhs - &system * &v;
    if let Some(correction) = lu.solve(&residual) {
        v += correction;
    }
    Ok(ValueFunction(v.iter().copied().collect()))
}

/// `p0' v`.
pub fn return_of(mdp: &TabularMDP, value: &ValueFunction) -> Result<f64> {
    if value.len() != mdp.num_states {
        return invalid(format!("value has {} entries, MDP has {} states", value.len(), mdp.num_states));
    }
    Ok(dot(&mdp.initial_dist, &value.0))
}

/// Stopping threshold on the sup-norm change between sweeps. The absolute part
/// bounds the distance to the fixed point by 1e-9; the relative floor keeps
/// large-magnitude problems from stalling on rounding noise.
pub(crate) fn sweep_tolerance(discount: f64, scale: f64) -> f64 {
    if discount == 0.0 {
        return f64::INFINITY;
    }
    (1e-9 * (1.0 - discount) / discount).max(8.0 * f64::EPSILON * scale)
}

/// Runs `sweep(old, new)` from zero until the sup-norm change drops below
/// [`sweep_tolerance`]. Returns the final iterate and the sweep count.
pub(crate) fn iterate_to_fixed_point<F>(num_states: usize, discount: f64, mut sweep: F) -> Result<(Vec<f64>, usize)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut v = vec![0.0; num_states];
    let mut next = vec![0.0; num_states];
    let mut change = f64::INFINITY;
    for k in 1..=MAX_SWEEPS {
        sweep(&v, &mut next);
        change = sup_norm_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if change <= sweep_tolerance(discount, scale) {
            return Ok((v, k));
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::NumericalFailure { iterations: MAX_SWEEPS, residual: change })
}

/// Argmax with ties to the lowest index.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, q) in values.into_iter().enumerate() {
        if q > best.1 {
            best = (i, q);
        }
    }
    best
}

fn nominal_q(mdp: &TabularMDP, model: &TransitionModel, s: usize, a: usize, v: &[f64]) -> f64 {
    mdp.reward(s, a) + mdp.discount * dot(model.row(s, a), v)
}

/// Value iteration on a fixed transition model, followed by greedy policy
/// extraction at the final iterate.
pub fn solve_nominal(mdp: &TabularMDP, model: &TransitionModel) -> Result<(Policy, ValueFunction)> {
    model.check_matches(mdp)?;
    let (v, _) = iterate_to_fixed_point(mdp.num_states, mdp.discount, |old, new| {
        for (s, out) in new.iter_mut().enumerate() {
            *out = argmax((0..mdp.num_actions).map(|a| nominal_q(mdp, model, s, a, old))).1;
        }
    })?;
    let policy = (0..mdp.num_states)
        .map(|s| argmax((0..mdp.num_actions).map(|a| nominal_q(mdp, model, s, a, &v))).0)
        .collect();
    Ok((Policy(policy), ValueFunction(v)))
}

/// Largest Bellman residual of `value` under `policy` on `model`.
pub fn policy_residual(mdp: &TabularMDP, policy: &Policy, model: &TransitionModel, value: &ValueFunction) -> f64 {
    (0..mdp.num_states)
        .map(|s| (nominal_q(mdp, model, s, policy.action(s), &value.0) - value[s]).abs())
        .fold(0.0, f64::max)
}

/// Largest optimal-Bellman residual of `value` on `model`.
pub fn optimality_residual(mdp: &TabularMDP, model: &TransitionModel, value: &ValueFunction) -> f64 {
    (0..mdp.num_states)
        .map(|s| {
            let best = argmax((0..mdp.num_actions).map(|a| nominal_q(mdp, model, s, a, &value.0))).1;
            (best - value[s]).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_loop(reward: f64, gamma: f64) -> (TabularMDP, TransitionModel) {
        let mdp = TabularMDP::new(1, 1, vec![reward], gamma, vec![1.0]).unwrap();
        let model = TransitionModel::new(1, 1, vec![1.0]).unwrap();
        (mdp, model)
    }

    #[test]
    fn self_loop_is_geometric_series() {
        let (mdp, model) = single_loop(1.0, 0.9);
        let v = evaluate_policy(&mdp, &Policy(vec![0]), &model).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn only_first_step_rewarded() {
        let mdp = TabularMDP::new(2, 1, vec![1.0, 0.0], 0.5, vec![1.0, 0.0]).unwrap();
        let model = TransitionModel::from_rows(2, 1, vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let v = evaluate_policy(&mdp, &Policy(vec![0, 0]), &model).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn return_is_initial_dot_value() {
        let mdp = TabularMDP::new(2, 1, vec![0.0; 2], 0.5, vec![1.0, 0.0]).unwrap();
        assert_eq!(return_of(&mdp, &ValueFunction(vec![3.0, 7.0])).unwrap(), 3.0);
        let mdp = TabularMDP::new(2, 1, vec![0.0; 2], 0.5, vec![0.5, 0.5]).unwrap();
        assert_eq!(return_of(&mdp, &ValueFunction(vec![2.0, 4.0])).unwrap(), 3.0);
        let mdp = TabularMDP::new(4, 1, vec![0.0; 4], 0.5, vec![0.25; 4]).unwrap();
        assert_eq!(return_of(&mdp, &ValueFunction(vec![1.0, 2.0, 3.0, 4.0])).unwrap(), 2.5);
        assert!(return_of(&mdp, &ValueFunction(vec![1.0])).is_err());
    }

    #[test]
    fn nominal_picks_rewarding_action() {
        let mdp = TabularMDP::new(1, 2, vec![0.0, 1.0], 0.9, vec![1.0]).unwrap();
        let model = TransitionModel::new(1, 2, vec![1.0, 1.0]).unwrap();
        let (policy, v) = solve_nominal(&mdp, &model).unwrap();
        assert_eq!(policy.0, vec![1]);
        assert!((v[0] - 10.0).abs() < 1e-8);
    }

    #[test]
    fn argmax_tie_goes_to_lowest_action() {
        let mdp = TabularMDP::new(2, 2, vec![1.0, 1.0, 0.0, 0.0], 0.9, vec![1.0, 0.0]).unwrap();
        let row = vec![0.3, 0.7];
        let model = TransitionModel::from_rows(2, 2, vec![row.clone(); 4]).unwrap();
        let (policy, _) = solve_nominal(&mdp, &model).unwrap();
        assert_eq!(policy.0, vec![0, 0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (mdp, _) = single_loop(1.0, 0.9);
        let model = TransitionModel::from_rows(2, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(evaluate_policy(&mdp, &Policy(vec![0]), &model), Err(Error::InvalidInput(_))));
        assert!(solve_nominal(&mdp, &model).is_err());
    }

    #[test]
    fn simplex_validation_repairs_small_drift_only() {
        let mut row = vec![0.5, 0.5 + 5e-8];
        check_simplex(&mut row).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut row = vec![0.5, 0.5 + 1e-6];
        assert!(check_simplex(&mut row).is_err());
        let mut row = vec![1.0 + 1e-8, -1e-8];
        check_simplex(&mut row).unwrap();
        assert_eq!(row[1], 0.0);
        assert!(TransitionModel::new(1, 1, vec![0.9]).is_err());
    }

    #[test]
    fn invalid_mdp_parameters() {
        assert!(TabularMDP::new(1, 1, vec![1.0], 1.0, vec![1.0]).is_err());
        assert!(TabularMDP::new(1, 1, vec![f64::NAN], 0.5, vec![1.0]).is_err());
        assert!(TabularMDP::new(2, 1, vec![1.0, 1.0], 0.5, vec![0.7, 0.7]).is_err());
        let mdp = TabularMDP::new(2, 1, vec![1.0, 1.0], 0.5, vec![1.0, 0.0]).unwrap();
        assert!(mdp.clone().with_support(vec![vec![], vec![0]]).is_err());
        assert!(mdp.clone().with_support(vec![vec![2], vec![0]]).is_err());
        let m = mdp.with_support(vec![vec![1, 0, 1], vec![1]]).unwrap();
        assert_eq!(m.support(0), &[0, 1]);
        assert_eq!(m.uncertain_cells(), 1);
    }

    #[test]
    fn zero_discount_stops_after_one_sweep() {
        let mdp = TabularMDP::new(1, 2, vec![2.0, 3.0], 0.0, vec![1.0]).unwrap();
        let model = TransitionModel::new(1, 2, vec![1.0, 1.0]).unwrap();
        let (policy, v) = solve_nominal(&mdp, &model).unwrap();
        assert_eq!(policy.0, vec![1]);
        assert_eq!(v.0, vec![3.0]);
    }
}
