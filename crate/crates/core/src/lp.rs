//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as `min c'x` subject to linear rows and `x >= 0`.
//! Rows are equilibrated before the tableau is built. Pricing is Dantzig's
//! rule, switching to Bland's rule after a run of degenerate pivots so the
//! method cannot cycle.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-8;
const DEGENERATE_RUN: usize = 50;
const HARRIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("infeasible")]
    Infeasible,
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Eq,
    GreaterEq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// A minimisation problem over `objective.len()` non-negative variables.
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self { num_vars: objective.len(), objective, rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `sum coeffs[j].1 * x[coeffs[j].0]  <relation>  rhs`.
    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars));
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).solve(self)
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows then the cost row, each `cols + 1` wide (rhs last).
    data: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
    /// Columns allowed to enter the basis.
    enterable: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars;
        let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                let scale = r.coeffs.iter().fold(0.0f64, |s, &(_, c)| s.max(c.abs()));
                let scale = if scale > 0.0 { scale } else { 1.0 };
                let mut coeffs: Vec<(usize, f64)> = r.coeffs.iter().map(|&(j, c)| (j, c / scale)).collect();
                let mut rhs = r.rhs / scale;
                let mut relation = r.relation;
                if rhs < 0.0 {
                    coeffs.iter_mut().for_each(|c| c.1 = -c.1);
                    rhs = -rhs;
                    relation = match relation {
                        Relation::LessEq => Relation::GreaterEq,
                        Relation::GreaterEq => Relation::LessEq,
                        Relation::Eq => Relation::Eq,
                    };
                }
                (coeffs, relation, rhs)
            })
            .collect();

        let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificials = rows.iter().filter(|r| r.1 != Relation::LessEq).count();
        let first_artificial = n + slacks;
        let cols = first_artificial + artificials;
        let width = cols + 1;
        let mut data = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let mut next_slack = n;
        let mut next_art = first_artificial;
        for (i, (coeffs, relation, rhs)) in rows.iter_mut().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            for &(j, c) in coeffs.iter() {
                row[j] += c;
            }
            row[cols] = *rhs;
            match relation {
                Relation::LessEq => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::GreaterEq => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Self { rows: m, cols, data, basis, first_artificial, enterable: cols }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn cost_row(&mut self) -> &mut [f64] {
        let w = self.width();
        let start = self.rows * w;
        &mut self.data[start..start + w]
    }

    /// Installs `costs` (per column) as the objective, priced out against the basis.
    fn set_objective(&mut self, costs: &[f64]) {
        let w = self.width();
        let cols = self.cols;
        let mut row = vec![0.0; w];
        row[..cols].copy_from_slice(&costs[..cols]);
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let src = &self.data[i * w..(i + 1) * w];
                row.iter_mut().zip(src).for_each(|(r, s)| *r -= cb * s);
            }
        }
        self.cost_row().copy_from_slice(&row);
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.at(pr, pc);
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|x| *x *= inv);
        prow[pc] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(r, p)| *r -= f * p);
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
        let cols = self.cols;
        for i in 0..self.rows {
            let rhs = &mut self.data[i * w + cols];
            if *rhs < 0.0 && *rhs > -HARRIS_TOL {
                *rhs = 0.0;
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let cost = &self.data[self.rows * self.width()..];
        let mut best: Option<(usize, f64)> = None;
        for (j, &d) in cost[..self.enterable].iter().enumerate() {
            if d < -COST_TOL {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn choose_leaving(&self, pc: usize, bland: bool) -> Option<usize> {
        // After phase 1, basic artificials sit at level zero and must stay
        // there: any nonzero entry in their row makes that row leave first.
        if self.enterable <= self.first_artificial {
            let blocking = (0..self.rows).find(|&i| self.basis[i] >= self.first_artificial && self.at(i, pc).abs() > PIVOT_TOL);
            if blocking.is_some() {
                return blocking;
            }
        }
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, self.cols).max(0.0) / a;
                    let better = best.is_none_or(|(bi, br)| {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                    });
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            return best.map(|(i, _)| i);
        }
        // Harris ratio test: bound the step with relaxed rhs values, then take
        // the largest pivot element among rows within that bound.
        let bound = (0..self.rows)
            .filter_map(|i| {
                let a = self.at(i, pc);
                (a > PIVOT_TOL).then(|| (self.at(i, self.cols).max(0.0) + HARRIS_TOL) / a)
            })
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, pc);
            if a > PIVOT_TOL && self.at(i, self.cols).max(0.0) / a <= bound && best.is_none_or(|(_, ba)| a > ba) {
                best = Some((i, a));
            }
        }
        best.map(|(i, _)| i)
    }

    fn optimize(&mut self, limit: usize) -> Result<(), LpError> {
        let mut degenerate = 0;
        for _ in 0..limit {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some(pc) = self.choose_entering(bland) else {
                return Ok(());
            };
            let Some(pr) = self.choose_leaving(pc, bland) else {
                return Err(LpError::Unbounded);
            };
            if self.at(pr, self.cols) <= PIVOT_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
        }
        Err(LpError::IterationLimit)
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let limit = 50 * (self.rows + self.cols) + 1000;
        if self.first_artificial < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            self.set_objective(&phase1);
            self.optimize(limit)?;
            let w = self.width();
            let infeasibility = -self.data[self.rows * w + self.cols];
            let scale = 1.0 + (0..self.rows).map(|i| self.at(i, self.cols)).fold(0.0, f64::max);
            if infeasibility > FEASIBILITY_TOL * scale {
                return Err(LpError::Infeasible);
            }
            // Drive remaining (zero-level) artificials out of the basis.
            for i in 0..self.rows {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .map(|j| (j, self.at(i, j).abs()))
                        .filter(|&(_, a)| a > 1e-9)
                        .max_by(|a, b| a.1.total_cmp(&b.1));
                    if let Some((j, _)) = col {
                        self.pivot(i, j);
                    }
                }
            }
            self.enterable = self.first_artificial;
        }
        let mut costs = vec![0.0; self.cols];
        costs[..lp.num_vars].copy_from_slice(&lp.objective);
        self.set_objective(&costs);
        self.optimize(limit)?;

        let mut x = vec![0.0; lp.num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < lp.num_vars {
                x[b] = self.at(i, self.cols).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }
}
