//! L1-ball geometry on the probability simplex.
//!
//! Two kernels live here. [`worst_case_l1`] minimises a linear function over
//! an L1 ball intersected with the simplex, which is the inner problem of
//! every robust backup. [`min_radius_center`] finds the smallest L1 ball that
//! touches each of a family of hyperplanes `{p : v_i' p = g_i}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::mdp::{check_simplex, dot, ValueFunction};

/// L1 diameter of the simplex; larger radii are clamped to it.
pub const MAX_RADIUS: f64 = 2.0;
const LEVEL_TOL: f64 = 1e-9;

/// `{p in simplex : ||p - nominal||_1 <= radius}`, optionally restricted to
/// probability vectors supported on `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1AmbiguitySet {
    nominal: Vec<f64>,
    radius: f64,
    support: Option<Vec<usize>>,
}

impl L1AmbiguitySet {
    pub fn new(nominal: Vec<f64>, radius: f64) -> Result<Self> {
        let mut nominal = nominal;
        check_simplex(&mut nominal).map_err(|e| Error::InvalidInput(format!("nominal point: {e}")))?;
        if radius.is_nan() || radius < 0.0 {
            return invalid(format!("radius {radius} must be non-negative"));
        }
        Ok(Self { nominal, radius: radius.min(MAX_RADIUS), support: None })
    }

    /// Restricts the set to distributions on `support` (sorted, in range). The
    /// nominal point must already put no mass outside it.
    pub fn with_support(mut self, support: &[usize]) -> Result<Self> {
        let n = self.nominal.len();
        if support.is_empty() || support.iter().any(|&j| j >= n) || support.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("support must be sorted, unique and in range");
        }
        if support.len() == n {
            self.support = None;
            return Ok(self);
        }
        let mut inside = vec![false; n];
        support.iter().for_each(|&j| inside[j] = true);
        let outside: f64 = (0..n).filter(|&j| !inside[j]).map(|j| self.nominal[j]).sum();
        if outside > crate::mdp::SIMPLEX_TOL {
            return invalid(format!("nominal point puts mass {outside} outside the support"));
        }
        (0..n).filter(|&j| !inside[j]).for_each(|j| self.nominal[j] = 0.0);
        self.support = Some(support.to_vec());
        Ok(self)
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.nominal.len()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        let on_support = match &self.support {
            None => true,
            Some(s) => p.iter().enumerate().all(|(j, &x)| x <= tol || s.binary_search(&j).is_ok()),
        };
        let sum: f64 = p.iter().sum();
        on_support
            && p.iter().all(|&x| x >= -tol)
            && (sum - 1.0).abs() <= tol
            && p.iter().zip(&self.nominal).map(|(a, b)| (a - b).abs()).sum::<f64>() <= self.radius + tol
    }
}

/// A hyperplane `{p : value' p = level}` that an ambiguity set must touch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneTarget {
    pub value: ValueFunction,
    pub level: f64,
}

impl HyperplaneTarget {
    pub fn new(value: ValueFunction, level: f64) -> Self {
        Self { value, level }
    }
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return invalid(format!("vectors of length {} and {}", p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Indices sorted by ascending value, ties by index.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Exact minimiser of `p' v` over the set.
///
/// Moves `min(radius / 2, 1 - nominal[i*])` mass onto the lowest-index state
/// `i*` with the smallest value, taking it from the highest-valued states first.
pub fn worst_case_l1(set: &L1AmbiguitySet, value: &ValueFunction) -> Result<(f64, Vec<f64>)> {
    if value.len() != set.dim() {
        return invalid(format!("value has {} entries, set has dimension {}", value.len(), set.dim()));
    }
    let order = ascending_order(value.as_slice());
    Ok(worst_case_with_order(set, value.as_slice(), &order))
}

/// [`worst_case_l1`] with the ascending order of `value` precomputed.
pub(crate) fn worst_case_with_order(set: &L1AmbiguitySet, value: &[f64], order: &[usize]) -> (f64, Vec<f64>) {
    let mut p = set.nominal.clone();
    shift_mass(set, order, &mut p);
    (dot(&p, value), p)
}

/// Value of [`worst_case_l1`] without materialising the minimiser when the
/// radius is zero.
pub(crate) fn worst_value_with_order(set: &L1AmbiguitySet, value: &[f64], order: &[usize]) -> f64 {
    if set.radius == 0.0 {
        return dot(&set.nominal, value);
    }
    worst_case_with_order(set, value, order).0
}

fn shift_mass(set: &L1AmbiguitySet, order: &[usize], p: &mut [f64]) {
    if set.radius == 0.0 {
        return;
    }
    let admissible = |j: &usize| set.support.as_ref().is_none_or(|s| s.binary_search(j).is_ok());
    let Some(&target) = order.iter().find(|j| admissible(j)) else {
        return;
    };
    let moved = (set.radius / 2.0).min(1.0 - p[target]).max(0.0);
    if moved == 0.0 {
        return;
    }
    let mut remaining = moved;
    for &j in order.iter().rev() {
        if remaining <= 0.0 || j == target {
            break;
        }
        if !admissible(&j) || p[j] == 0.0 {
            continue;
        }
        let take = p[j].min(remaining);
        p[j] -= take;
        remaining -= take;
    }
    p[target] += moved - remaining.max(0.0);
}

/// Closest point (in L1) to `p` on `{q in simplex : v' q = level}` together
/// with its distance. `None` when the level lies outside `[min v, max v]`.
///
/// Mass is moved from the states that change `v' q` the most per unit onto the
/// lowest-index extreme state, which is optimal by a fractional-knapsack
/// argument.
pub fn project_to_hyperplane(p: &[f64], v: &[f64], level: f64) -> Option<(f64, Vec<f64>)> {
    let order = ascending_order(v);
    let (lo, hi) = (v[order[0]], v[order[order.len() - 1]]);
    if level < lo - LEVEL_TOL || level > hi + LEVEL_TOL {
        return None;
    }
    let current = dot(p, v);
    let mut q = p.to_vec();
    let mut gap = level - current;
    if gap.abs() <= 0.0 {
        return Some((0.0, q));
    }
    // Receiver: lowest-index argmax when raising, lowest-index argmin when lowering.
    let (receiver, donors): (usize, Vec<usize>) = if gap > 0.0 {
        let top = *order.iter().find(|&&j| v[j] == hi).unwrap();
        (top, order.clone())
    } else {
        (order[0], order.iter().rev().copied().collect())
    };
    let mut moved = 0.0;
    for j in donors {
        if j == receiver || q[j] == 0.0 {
            continue;
        }
        let rate = (v[receiver] - v[j]).abs();
        if rate == 0.0 {
            break;
        }
        let need = gap.abs() / rate;
        let take = q[j].min(need);
        q[j] -= take;
        moved += take;
        gap -= gap.signum() * take * rate;
        if take >= need {
            break;
        }
    }
    q[receiver] += moved;
    Some((2.0 * moved, q))
}

fn check_targets(targets: &[HyperplaneTarget]) -> Result<Vec<HyperplaneTarget>> {
    let Some(first) = targets.first() else {
        return invalid("at least one hyperplane target is required");
    };
    let dim = first.value.len();
    if dim == 0 {
        return invalid("hyperplane targets need at least one state");
    }
    let mut unique: Vec<HyperplaneTarget> = Vec::with_capacity(targets.len());
    for (index, t) in targets.iter().enumerate() {
        if t.value.len() != dim {
            return invalid(format!("target {index} has dimension {}, expected {dim}", t.value.len()));
        }
        if t.value.0.iter().any(|x| !x.is_finite()) || !t.level.is_finite() {
            return invalid(format!("target {index} is not finite"));
        }
        let min = t.value.0.iter().copied().fold(f64::INFINITY, f64::min);
        let max = t.value.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if t.level < min - LEVEL_TOL || t.level > max + LEVEL_TOL {
            return Err(Error::InfeasibleTarget { index, level: t.level, min, max });
        }
        // Rescaled to values in [0, 1]; on the simplex this is the same hyperplane.
        let span = max - min;
        let scaled = if span > 0.0 {
            HyperplaneTarget {
                value: ValueFunction(t.value.0.iter().map(|x| (x - min) / span).collect()),
                level: ((t.level - min) / span).clamp(0.0, 1.0),
            }
        } else {
            HyperplaneTarget { value: ValueFunction(vec![0.0; dim]), level: 0.0 }
        };
        if !unique.iter().any(|u| u == &scaled) {
            unique.push(scaled);
        }
    }
    Ok(unique)
}

/// Radius needed for a ball at `center` to touch every target.
pub fn covering_radius(center: &[f64], targets: &[HyperplaneTarget]) -> Result<f64> {
    let mut radius: f64 = 0.0;
    for (index, t) in targets.iter().enumerate() {
        if t.value.len() != center.len() {
            return invalid("center and target dimensions differ");
        }
        let (d, _) = project_to_hyperplane(center, t.value.as_slice(), t.level).ok_or_else(|| {
            let min = t.value.0.iter().copied().fold(f64::INFINITY, f64::min);
            let max = t.value.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Error::InfeasibleTarget { index, level: t.level, min, max }
        })?;
        radius = radius.max(d);
    }
    Ok(radius.min(MAX_RADIUS))
}

/// Column layout of the center LP: `p`, then per target the mass moved down
/// to its argmin and up to its argmax, then the radius.
struct CenterLayout {
    dim: usize,
    targets: usize,
}

impl CenterLayout {
    fn p(&self, j: usize) -> usize {
        j
    }
    fn down(&self, i: usize, j: usize) -> usize {
        self.dim + 2 * i * self.dim + j
    }
    fn up(&self, i: usize, j: usize) -> usize {
        self.dim + (2 * i + 1) * self.dim + j
    }
    fn radius(&self) -> usize {
        self.dim * (1 + 2 * self.targets)
    }
    fn num_vars(&self) -> usize {
        self.radius() + 1
    }
}

/// Rows shared by both center LPs.
fn center_constraints(lp: &mut LinearProgram, layout: &CenterLayout, targets: &[HyperplaneTarget]) {
    let n = layout.dim;
    lp.add((0..n).map(|j| (layout.p(j), 1.0)).collect(), Relation::Eq, 1.0);
    for (i, t) in targets.iter().enumerate() {
        let v = t.value.as_slice();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for j in 0..n {
            // Mass leaving state j cannot exceed what the center holds there.
            lp.add(
                vec![(layout.down(i, j), 1.0), (layout.up(i, j), 1.0), (layout.p(j), -1.0)],
                Relation::LessEq,
                0.0,
            );
        }
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(3 * n);
        for j in 0..n {
            row.push((layout.p(j), v[j]));
            if v[j] > lo {
                row.push((layout.down(i, j), -(v[j] - lo)));
            }
            if v[j] < hi {
                row.push((layout.up(i, j), hi - v[j]));
            }
        }
        lp.add(row, Relation::Eq, t.level);
        let mut dist: Vec<(usize, f64)> = (0..n).flat_map(|j| [(layout.down(i, j), 2.0), (layout.up(i, j), 2.0)]).collect();
        dist.push((layout.radius(), -1.0));
        lp.add(dist, Relation::LessEq, 0.0);
    }
}

fn hyperplane_point(target: &HyperplaneTarget) -> Vec<f64> {
    let v = target.value.as_slice();
    let order = ascending_order(v);
    let (lo_j, hi_j) = (order[0], *order.iter().find(|&&j| v[j] == v[order[order.len() - 1]]).unwrap());
    let mut p = vec![0.0; v.len()];
    let span = v[hi_j] - v[lo_j];
    if span == 0.0 {
        p[lo_j] = 1.0;
        return p;
    }
    let w = ((target.level - v[lo_j]) / span).clamp(0.0, 1.0);
    p[lo_j] += 1.0 - w;
    p[hi_j] += w;
    p
}

fn normalise(mut p: Vec<f64>) -> Vec<f64> {
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// Smallest L1 ball (center, radius) touching every target hyperplane within
/// the simplex.
///
/// A single distinct target is answered in closed form with radius zero. The
/// general case is one linear program over the center, the per-target mass
/// transfers and the radius. The optimal center is not unique; any optimum is
/// returned.
pub fn min_radius_center(targets: &[HyperplaneTarget]) -> Result<(Vec<f64>, f64)> {
    let targets = check_targets(targets)?;
    if targets.len() == 1 {
        return Ok((hyperplane_point(&targets[0]), 0.0));
    }
    let layout = CenterLayout { dim: targets[0].value.len(), targets: targets.len() };
    let mut objective = vec![0.0; layout.num_vars()];
    objective[layout.radius()] = 1.0;
    let mut lp = LinearProgram::minimize(objective);
    center_constraints(&mut lp, &layout, &targets);
    let sol = lp.solve()?;
    let center = normalise(sol.x[..layout.dim].to_vec());
    let radius = covering_radius(&center, &targets)?;
    Ok((center, radius))
}

/// Like [`min_radius_center`] but, among optimal centers, returns one closest
/// in L1 to `anchor`. The radius is optimised first; the anchor distance is
/// then minimised with the radius held at its optimum.
pub fn min_radius_center_near(targets: &[HyperplaneTarget], anchor: &[f64]) -> Result<(Vec<f64>, f64)> {
    let targets = check_targets(targets)?;
    let dim = targets[0].value.len();
    if anchor.len() != dim {
        return invalid("anchor dimension differs from the targets");
    }
    if targets.len() == 1 {
        let t = &targets[0];
        let (_, q) = project_to_hyperplane(anchor, t.value.as_slice(), t.level)
            .ok_or(Error::InfeasibleTarget { index: 0, level: t.level, min: f64::NAN, max: f64::NAN })?;
        return Ok((normalise(q), 0.0));
    }
    let layout = CenterLayout { dim, targets: targets.len() };
    let mut objective = vec![0.0; layout.num_vars()];
    objective[layout.radius()] = 1.0;
    let mut lp = LinearProgram::minimize(objective);
    center_constraints(&mut lp, &layout, &targets);
    let first = lp.solve()?;
    let best = first.objective.max(0.0);
    let fallback = normalise(first.x[..dim].to_vec());
    let fallback_radius = covering_radius(&fallback, &targets)?;

    // Second stage: extra variables e_j >= |p_j - anchor_j|.
    let extra = layout.num_vars();
    let mut objective = vec![0.0; extra + dim];
    objective[extra..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(objective);
    center_constraints(&mut lp, &layout, &targets);
    lp.add(vec![(layout.radius(), 1.0)], Relation::LessEq, best * (1.0 + 1e-9) + 1e-12);
    for j in 0..dim {
        lp.add(vec![(extra + j, 1.0), (layout.p(j), -1.0)], Relation::GreaterEq, -anchor[j]);
        lp.add(vec![(extra + j, 1.0), (layout.p(j), 1.0)], Relation::GreaterEq, anchor[j]);
    }
    // The first-stage optimum stands whenever the anchored stage trips on rounding.
    let Ok(sol) = lp.solve() else {
        return Ok((fallback, fallback_radius));
    };
    let center = normalise(sol.x[..dim].to_vec());
    let radius = covering_radius(&center, &targets)?;
    if radius > fallback_radius + 1e-9 * (1.0 + fallback_radius) {
        return Ok((fallback, fallback_radius));
    }
    Ok((center, radius))
}
