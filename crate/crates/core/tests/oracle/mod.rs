//! Reference solutions computed through an external LP solver, independent of
//! the crate's own simplex and closed forms.
#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

fn simplex_vars(problem: &mut Problem, dim: usize, support: Option<&[usize]>, obj: impl Fn(usize) -> f64) -> Vec<Variable> {
    let vars: Vec<Variable> = (0..dim)
        .map(|j| {
            let allowed = support.is_none_or(|s| s.contains(&j));
            problem.add_var(obj(j), (0.0, if allowed { 1.0 } else { 0.0 }))
        })
        .collect();
    let sum: Vec<(Variable, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
    problem.add_constraint(sum.as_slice(), ComparisonOp::Eq, 1.0);
    vars
}

/// Adds `t_j >= |p_j - c_j|` for a fixed point `c` and returns the `t_j`.
fn abs_gap_fixed(problem: &mut Problem, p: &[Variable], c: &[f64], obj: f64) -> Vec<Variable> {
    p.iter()
        .zip(c)
        .map(|(&pj, &cj)| {
            let t = problem.add_var(obj, (0.0, f64::INFINITY));
            problem.add_constraint(&[(t, 1.0), (pj, -1.0)][..], ComparisonOp::Ge, -cj);
            problem.add_constraint(&[(t, 1.0), (pj, 1.0)][..], ComparisonOp::Ge, cj);
            t
        })
        .collect()
}

/// `min v' p` over `{p in simplex (on support) : ||p - nominal||_1 <= radius}`.
pub fn worst_case(nominal: &[f64], radius: f64, support: Option<&[usize]>, v: &[f64]) -> f64 {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let p = simplex_vars(&mut problem, v.len(), support, |j| v[j]);
    let t = abs_gap_fixed(&mut problem, &p, nominal, 0.0);
    let sum: Vec<(Variable, f64)> = t.iter().map(|&x| (x, 1.0)).collect();
    problem.add_constraint(sum.as_slice(), ComparisonOp::Le, radius);
    problem.solve().expect("worst-case oracle LP").objective()
}

/// L1 distance from `p` to `{q in simplex : v' q = level}`.
pub fn hyperplane_distance(p: &[f64], v: &[f64], level: f64) -> Option<f64> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let q = simplex_vars(&mut problem, v.len(), None, |_| 0.0);
    let value: Vec<(Variable, f64)> = q.iter().zip(v).map(|(&x, &c)| (x, c)).collect();
    problem.add_constraint(value.as_slice(), ComparisonOp::Eq, level);
    abs_gap_fixed(&mut problem, &q, p, 1.0);
    problem.solve().ok().map(|s| s.objective())
}

/// Minimum radius of an L1 ball touching every hyperplane `v_i' q = g_i`,
/// with one explicit touch point `q_i` per hyperplane.
pub fn center_radius(targets: &[(Vec<f64>, f64)]) -> f64 {
    let dim = targets[0].0.len();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let psi = problem.add_var(1.0, (0.0, f64::INFINITY));
    let p = simplex_vars(&mut problem, dim, None, |_| 0.0);
    for (v, g) in targets {
        let q = simplex_vars(&mut problem, dim, None, |_| 0.0);
        let value: Vec<(Variable, f64)> = q.iter().zip(v).map(|(&x, &c)| (x, c)).collect();
        problem.add_constraint(value.as_slice(), ComparisonOp::Eq, *g);
        let mut budget = vec![(psi, -1.0)];
        for (&qj, &pj) in q.iter().zip(&p) {
            let t = problem.add_var(0.0, (0.0, f64::INFINITY));
            problem.add_constraint(&[(t, 1.0), (qj, -1.0), (pj, 1.0)][..], ComparisonOp::Ge, 0.0);
            problem.add_constraint(&[(t, 1.0), (qj, 1.0), (pj, -1.0)][..], ComparisonOp::Ge, 0.0);
            budget.push((t, 1.0));
        }
        problem.add_constraint(budget.as_slice(), ComparisonOp::Le, 0.0);
    }
    problem.solve().expect("center oracle LP").objective()
}

/// Covering radius of `center` for the targets, via [`hyperplane_distance`].
pub fn covering_radius(center: &[f64], targets: &[(Vec<f64>, f64)]) -> f64 {
    targets
        .iter()
        .map(|(v, g)| hyperplane_distance(center, v, *g).expect("feasible target"))
        .fold(0.0, f64::max)
}

/// Best covering radius over a regular simplex grid with `steps` divisions.
pub fn grid_radius(targets: &[(Vec<f64>, f64)], steps: usize) -> f64 {
    let dim = targets[0].0.len();
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; dim];
    fn walk(j: usize, left: usize, counts: &mut Vec<usize>, steps: usize, f: &mut dyn FnMut(&[usize])) {
        if j + 1 == counts.len() {
            counts[j] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[j] = c;
            walk(j + 1, left - c, counts, steps, f);
        }
    }
    walk(0, steps, &mut counts, steps, &mut |c| {
        let p: Vec<f64> = c.iter().map(|&x| x as f64 / steps as f64).collect();
        best = best.min(covering_radius(&p, targets));
    });
    best
}
