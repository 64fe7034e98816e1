//! Small dense linear programs: two-phase tableau simplex with bounded
//! variables.
//!
//! Solves `min c·x` subject to `a_i·x {<=, =, >=} b_i` and `0 <= x <= u`.
//! Pricing is Dantzig's largest reduced cost; after a run of degenerate
//! pivots it switches to Bland's rule, which cannot cycle.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

pub const DEFAULT_ITERATION_CAP: usize = 100_000;
const DEGENERATE_RUN: usize = 50;
const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a variable `0 <= x <= upper` (use `f64::INFINITY` for no bound).
    pub fn add_var(&mut self, cost: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn var_count(&self) -> usize {
        self.cost.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        self.solve_with_cap(DEFAULT_ITERATION_CAP)
    }

    pub fn solve_with_cap(&self, cap: usize) -> Result<LpOutcome> {
        if let Some(j) = self.upper.iter().position(|u| u.is_nan() || *u < 0.0) {
            return Err(Error::Numerical(format!("variable {j} has a negative upper bound")));
        }
        let mut t = Tableau::build(self);
        t.iterations_left = cap;
        // phase 1: drive artificials to zero
        let phase1: Vec<f64> = (0..t.ncols).map(|j| if j >= t.first_artificial { 1.0 } else { 0.0 }).collect();
        t.set_costs(&phase1);
        if t.run()? == Step::Unbounded {
            return Err(Error::Numerical("phase 1 reported unbounded".into()));
        }
        let infeas: f64 = t.basis.iter().zip(&t.beta).filter(|(b, _)| **b >= t.first_artificial).map(|(_, v)| *v).sum();
        if infeas > 1e-9 * (1.0 + t.rhs_scale) {
            return Ok(LpOutcome::Infeasible);
        }
        // artificials are pinned at zero from here on
        for j in t.first_artificial..t.ncols {
            t.upper[j] = 0.0;
        }
        let mut phase2 = vec![0.0; t.ncols];
        phase2[..self.cost.len()].copy_from_slice(&self.cost);
        t.set_costs(&phase2);
        if t.run()? == Step::Unbounded {
            return Ok(LpOutcome::Unbounded);
        }
        let x = t.values(self.cost.len());
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    first_artificial: usize,
    /// Row-major `m x ncols` matrix `B^-1 A`.
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    rhs_scale: f64,
    iterations_left: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.cost.len();
        let m = lp.rows.len();
        // normalise to non-negative right-hand sides
        let rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let flipped = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coeffs.iter().map(|&(j, v)| (j, -v)).collect(), flipped, -r.rhs)
                } else {
                    (r.coeffs.clone(), r.relation, r.rhs)
                }
            })
            .collect();
        let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + slack_count;
        let ncols = first_artificial + art_count;
        let mut a = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let (mut slack, mut art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut a[i * ncols..(i + 1) * ncols];
            for &(j, v) in coeffs {
                row[j] += v;
            }
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
            beta[i] = *rhs;
        }
        let mut upper = vec![f64::INFINITY; ncols];
        upper[..n].copy_from_slice(&lp.upper);
        let mut is_basic = vec![false; ncols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let rhs_scale = beta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Tableau {
            m,
            ncols,
            first_artificial,
            a,
            beta,
            basis,
            at_upper: vec![false; ncols],
            is_basic,
            upper,
            cost: vec![0.0; ncols],
            reduced: vec![0.0; ncols],
            rhs_scale,
            iterations_left: 0,
        }
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.reduced.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
                for (d, v) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * v;
                }
            }
        }
    }

    fn eligible(&self, j: usize) -> Option<f64> {
        if self.is_basic[j] || self.upper[j] == 0.0 {
            return None;
        }
        let d = self.reduced[j];
        if !self.at_upper[j] && d < -COST_TOL {
            Some(-d)
        } else if self.at_upper[j] && d > COST_TOL {
            Some(d)
        } else {
            None
        }
    }

    fn run(&mut self) -> Result<Step> {
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            let entering = if bland {
                (0..self.ncols).find(|&j| self.eligible(j).is_some())
            } else {
                (0..self.ncols)
                    .filter_map(|j| self.eligible(j).map(|s| (j, s)))
                    .fold(None, |best: Option<(usize, f64)>, (j, s)| match best {
                        Some((_, bs)) if bs >= s => best,
                        _ => Some((j, s)),
                    })
                    .map(|(j, _)| j)
            };
            let Some(q) = entering else { return Ok(Step::Optimal) };
            if self.iterations_left == 0 {
                return Err(Error::Numerical("simplex iteration cap reached".into()));
            }
            self.iterations_left -= 1;

            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            // ratio test: step t >= 0 along x_q += dir * t
            let mut step = self.upper[q];
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
            let mut best_pivot = 0.0f64;
            for i in 0..self.m {
                let alpha = dir * self.a[i * self.ncols + q];
                let b = self.basis[i];
                let (limit, to_upper) = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some((r, _)) => {
                        limit < step - 1e-12
                            || (limit <= step + 1e-12
                                && if bland { b < self.basis[r] } else { alpha.abs() > best_pivot })
                    }
                };
                if better {
                    step = limit.min(step);
                    leave = Some((i, to_upper));
                    best_pivot = alpha.abs();
                }
            }
            if step.is_infinite() {
                return Ok(Step::Unbounded);
            }
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + q];
                if alpha != 0.0 {
                    self.beta[i] -= dir * alpha * step;
                }
            }
            match leave {
                None => {
                    // bound flip, no basis change
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[q] { self.upper[q] - step } else { step };
                    let old = self.basis[r];
                    self.is_basic[old] = false;
                    self.at_upper[old] = to_upper;
                    self.basis[r] = q;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.beta[r] = entering_value;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let p = self.a[r * n + q];
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.a[r * n..(r + 1) * n].to_vec();
        let nz: Vec<usize> = (0..n).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * n..(i + 1) * n];
            for &j in &nz {
                row[j] -= f * pivot_row[j];
            }
            row[q] = 0.0;
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for &j in &nz {
                self.reduced[j] -= f * pivot_row[j];
            }
            self.reduced[q] = 0.0;
        }
    }

    fn values(&self, n: usize) -> Vec<f64> {
        let mut x: Vec<f64> = (0..n).map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 }).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.beta[i].clamp(0.0, self.upper[b]);
            }
        }
        x
    }
}
