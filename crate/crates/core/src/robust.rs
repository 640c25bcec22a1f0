//! Robust Bellman backups and robust value iteration over s,a-rectangular L1
//! ambiguity sets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{ascending_order, worst_case_with_order, worst_value_with_order, L1AmbiguitySet};
use crate::mdp::{argmax, iterate_to_fixed_point, return_of, Policy, TabularMDP, TransitionModel, ValueFunction};

/// An MDP whose transition rows range over one L1 set per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousMDP {
    base: TabularMDP,
    sets: Vec<L1AmbiguitySet>,
}

impl AmbiguousMDP {
    /// Sets are indexed by cell. Each set inherits the structural support of
    /// its cell unless it already carries a narrower one.
    pub fn new(base: TabularMDP, sets: Vec<L1AmbiguitySet>) -> Result<Self> {
        if sets.len() != base.num_cells() {
            return invalid(format!("expected {} ambiguity sets, got {}", base.num_cells(), sets.len()));
        }
        let mut attached = Vec::with_capacity(sets.len());
        for (cell, set) in sets.into_iter().enumerate() {
            if set.dim() != base.num_states() {
                return invalid(format!("ambiguity set {cell} has dimension {}", set.dim()));
            }
            let set = if set.support().is_none() && !base.has_full_support(cell) {
                set.with_support(base.support(cell))?
            } else {
                set
            };
            attached.push(set);
        }
        Ok(Self { base, sets: attached })
    }

    /// Zero-radius sets at every row of `model`.
    pub fn nominal(base: TabularMDP, model: &TransitionModel) -> Result<Self> {
        let sets = (0..base.num_cells())
            .map(|c| L1AmbiguitySet::new(model.cell_row(c).to_vec(), 0.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, sets)
    }

    pub fn base(&self) -> &TabularMDP {
        &self.base
    }

    pub fn sets(&self) -> &[L1AmbiguitySet] {
        &self.sets
    }

    pub fn set(&self, state: usize, action: usize) -> &L1AmbiguitySet {
        &self.sets[self.base.cell(state, action)]
    }

    pub fn radii(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.radius()).collect()
    }

    fn q(&self, state: usize, action: usize, v: &[f64], order: &[usize]) -> f64 {
        let cell = self.base.cell(state, action);
        self.base.rewards()[cell] + self.base.discount() * worst_value_with_order(&self.sets[cell], v, order)
    }

    fn check_value(&self, v: &ValueFunction) -> Result<()> {
        if v.len() != self.base.num_states() {
            return invalid(format!("value has {} entries, MDP has {} states", v.len(), self.base.num_states()));
        }
        Ok(())
    }

    /// Adversarial transition model attaining the inner minimum at `v`.
    pub fn worst_case_model(&self, v: &ValueFunction) -> Result<TransitionModel> {
        self.check_value(v)?;
        let order = ascending_order(v.as_slice());
        let rows = self.sets.iter().map(|set| worst_case_with_order(set, v.as_slice(), &order).1).collect();
        TransitionModel::from_rows(self.base.num_states(), self.base.num_actions(), rows)
    }
}

/// Output of a robust solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolution {
    pub value: ValueFunction,
    pub policy: Policy,
    /// `p0' value`: the robust return of `policy`.
    pub safe_return: f64,
    pub iterations: usize,
}

/// `(T v)(s) = max_a min_{p in P_sa} r(s,a) + gamma p' v`.
pub fn robust_bellman(amdp: &AmbiguousMDP, v: &ValueFunction) -> Result<ValueFunction> {
    amdp.check_value(v)?;
    let order = ascending_order(v.as_slice());
    let na = amdp.base.num_actions();
    let out = (0..amdp.base.num_states())
        .map(|s| argmax((0..na).map(|a| amdp.q(s, a, v.as_slice(), &order))).1)
        .collect();
    Ok(ValueFunction(out))
}

fn greedy_policy(amdp: &AmbiguousMDP, v: &[f64]) -> Policy {
    let order = ascending_order(v);
    let na = amdp.base.num_actions();
    Policy((0..amdp.base.num_states()).map(|s| argmax((0..na).map(|a| amdp.q(s, a, v, &order))).0).collect())
}

/// Robust value iteration from zero, with the greedy robust policy extracted
/// at the fixed point.
pub fn solve_robust(amdp: &AmbiguousMDP) -> Result<RobustSolution> {
    let na = amdp.base.num_actions();
    let mut order = Vec::new();
    let (v, iterations) = iterate_to_fixed_point(amdp.base.num_states(), amdp.base.discount(), |old, new| {
        order = ascending_order(old);
        for (s, out) in new.iter_mut().enumerate() {
            *out = argmax((0..na).map(|a| amdp.q(s, a, old, &order))).1;
        }
    })?;
    let policy = greedy_policy(amdp, &v);
    let value = ValueFunction(v);
    let safe_return = return_of(&amdp.base, &value)?;
    Ok(RobustSolution { value, policy, safe_return, iterations })
}

/// Worst-case value of a fixed policy: the fixed point of the min-only operator.
pub fn robust_evaluate(amdp: &AmbiguousMDP, policy: &Policy) -> Result<ValueFunction> {
    policy.check(&amdp.base)?;
    let mut order = Vec::new();
    let (v, _) = iterate_to_fixed_point(amdp.base.num_states(), amdp.base.discount(), |old, new| {
        order = ascending_order(old);
        for (s, out) in new.iter_mut().enumerate() {
            *out = amdp.q(s, policy.action(s), old, &order);
        }
    })?;
    Ok(ValueFunction(v))
}
