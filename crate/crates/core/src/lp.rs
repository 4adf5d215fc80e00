//! Dense bounded-variable primal simplex.
//!
//! Solves `min c·x` subject to `A x = b` and `l ≤ x ≤ u`, where every lower
//! bound is finite and upper bounds may be infinite. Inequality rows are
//! turned into equalities with an explicit slack column. The solver keeps a
//! full tableau, so it is meant for the small, dense problems that show up in
//! dispatch and storage planning (a few hundred rows at most).
//!
//! Pivoting is deterministic: Dantzig pricing with lowest-index tie breaking,
//! switching to Bland's rule after a long run of degenerate steps.

use std::fmt;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "linear program is infeasible"),
            LpError::Unbounded => write!(f, "linear program is unbounded"),
            LpError::IterationLimit => write!(f, "simplex iteration limit reached"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

/// A linear program in bounded equality form.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[lower, upper]`; `upper` may be `f64::INFINITY`.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        assert!(lower.is_finite(), "lower bounds must be finite");
        assert!(upper >= lower, "empty variable domain [{lower}, {upper}]");
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.cost.len()));
        self.rows.push(Row { coeffs, rhs });
    }

    /// `Σ a·x ≤ rhs`; returns the index of the slack column.
    pub fn add_le(&mut self, mut coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let s = self.add_var(0.0, 0.0, f64::INFINITY);
        coeffs.push((s, 1.0));
        self.add_eq(coeffs, rhs);
        s
    }

    /// `Σ a·x ≥ rhs`; returns the index of the surplus column.
    pub fn add_ge(&mut self, mut coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let s = self.add_var(0.0, 0.0, f64::INFINITY);
        coeffs.push((s, -1.0));
        self.add_eq(coeffs, rhs);
        s
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let mut tableau = Tableau::build(self);
        let mut iterations = 0;
        if tableau.n_art > 0 {
            let phase1: Vec<f64> = (0..tableau.ncols)
                .map(|j| if j >= tableau.n_struct { 1.0 } else { 0.0 })
                .collect();
            tableau.set_costs(&phase1);
            iterations += tableau.run()?;
            let infeasibility: f64 = (tableau.n_struct..tableau.ncols).map(|j| tableau.x[j]).sum();
            let scale = self.rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
            if infeasibility > 1e-7 * scale {
                return Err(LpError::Infeasible);
            }
            tableau.retire_artificials();
        }
        let mut phase2 = self.cost.clone();
        phase2.resize(tableau.ncols, 0.0);
        tableau.set_costs(&phase2);
        iterations += tableau.run()?;

        let mut x: Vec<f64> = tableau.x[..tableau.n_struct].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
        let objective = x.iter().zip(&self.cost).map(|(v, c)| v * c).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    n_struct: usize,
    n_art: usize,
    /// Row-major `m × ncols`, holds `B⁻¹ A`.
    t: Vec<f64>,
    reduced: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.cost.len();

        let mut dense = vec![0.0; m * n];
        let mut nnz_col = vec![0usize; n];
        let mut row_of_col = vec![usize::MAX; n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    if dense[i * n + j] == 0.0 {
                        nnz_col[j] += 1;
                        row_of_col[j] = i;
                    }
                    dense[i * n + j] += a;
                }
            }
        }

        let x0: Vec<f64> = lp.lower.clone();
        let mut residual: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        for i in 0..m {
            for j in 0..n {
                let a = dense[i * n + j];
                if a != 0.0 {
                    residual[i] -= a * x0[j];
                }
            }
        }

        // Crash basis: a singleton column per row when its implied value is in bounds.
        let mut basic_col: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut used = vec![false; n];
        for j in 0..n {
            if nnz_col[j] != 1 {
                continue;
            }
            let i = row_of_col[j];
            if basic_col[i].is_some() || used[j] {
                continue;
            }
            let a = dense[i * n + j];
            if a.abs() < 1e-12 {
                continue;
            }
            let v = x0[j] + residual[i] / a;
            let tol = 1e-12 * (1.0 + v.abs());
            if v >= lp.lower[j] - tol && v <= lp.upper[j] + tol {
                basic_col[i] = Some((j, v.clamp(lp.lower[j], lp.upper[j])));
                used[j] = true;
            }
        }

        let art_rows: Vec<usize> = (0..m).filter(|&i| basic_col[i].is_none()).collect();
        let n_art = art_rows.len();
        let ncols = n + n_art;

        let mut t = vec![0.0; m * ncols];
        for i in 0..m {
            t[i * ncols..i * ncols + n].copy_from_slice(&dense[i * n..(i + 1) * n]);
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut x = x0;
        let mut status: Vec<Status> = (0..n).map(|_| Status::AtLower).collect();
        let mut basis = vec![0usize; m];

        for (k, &i) in art_rows.iter().enumerate() {
            let j = n + k;
            let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
            t[i * ncols + j] = sign;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(residual[i].abs());
            status.push(Status::Basic);
            basis[i] = j;
        }
        for (i, bc) in basic_col.iter().enumerate() {
            if let Some((j, v)) = *bc {
                x[j] = v;
                status[j] = Status::Basic;
                basis[i] = j;
            }
        }
        // B is diagonal, so B⁻¹A is a row scaling.
        for i in 0..m {
            let p = t[i * ncols + basis[i]];
            if p != 1.0 {
                for v in &mut t[i * ncols..(i + 1) * ncols] {
                    *v /= p;
                }
            }
        }

        Tableau {
            m,
            ncols,
            n_struct: n,
            n_art,
            t,
            reduced: vec![0.0; ncols],
            cost: vec![0.0; ncols],
            lower,
            upper,
            x,
            status,
            basis,
        }
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.reduced.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (d, a) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.reduced[self.basis[i]] = 0.0;
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            let dir = match self.status[j] {
                Status::Basic => continue,
                Status::AtLower if self.reduced[j] < -COST_TOL => 1.0,
                Status::AtUpper if self.reduced[j] > COST_TOL => -1.0,
                _ => continue,
            };
            if self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            let score = self.reduced[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs simplex iterations with the current costs until optimal.
    fn run(&mut self) -> Result<usize, LpError> {
        let limit = 50 * (self.m + self.ncols) + 1000;
        let mut degenerate = 0usize;
        for iter in 0..limit {
            let bland = degenerate > DEGENERATE_STREAK;
            let Some((j, dir)) = self.entering(bland) else {
                return Ok(iter);
            };

            // Ratio test over basic variables.
            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = dir * self.t[i * self.ncols + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let limit = if alpha > 0.0 {
                    (self.x[b] - self.lower[b]).max(0.0) / alpha
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.x[b]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(r) => {
                        let tie = 1e-12 * (1.0 + theta.abs());
                        if limit < theta - tie {
                            true
                        } else if limit <= theta + tie {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                alpha.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit;
                    leave = Some(i);
                    leave_alpha = alpha.abs();
                }
            }

            let span = self.upper[j] - self.lower[j];
            if span.is_finite() && span <= theta {
                // Bound flip, basis unchanged.
                self.shift(j, dir, span);
                self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                degenerate = 0;
                continue;
            }
            let Some(r) = leave else {
                return Err(LpError::Unbounded);
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            self.shift(j, dir, theta);
            let b = self.basis[r];
            let alpha = dir * self.t[r * self.ncols + j];
            if alpha > 0.0 {
                self.x[b] = self.lower[b];
                self.status[b] = Status::AtLower;
            } else {
                self.x[b] = self.upper[b];
                self.status[b] = Status::AtUpper;
            }
            self.pivot(r, j);
        }
        Err(LpError::IterationLimit)
    }

    /// Moves nonbasic `j` by `dir * step` and updates the basic values.
    fn shift(&mut self, j: usize, dir: f64, step: f64) {
        if step == 0.0 {
            return;
        }
        for i in 0..self.m {
            let a = self.t[i * self.ncols + j];
            if a != 0.0 {
                self.x[self.basis[i]] -= dir * step * a;
            }
        }
        self.x[j] += dir * step;
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncols;
        let p = self.t[r * n + j];
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (pivot_row, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[j];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (d, pr) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *d -= f * pr;
            }
        }
        self.reduced[j] = 0.0;
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) {
        for j in self.n_struct..self.ncols {
            self.upper[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.x[j] = 0.0;
                self.status[j] = Status::AtLower;
            }
        }
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n_struct {
                continue;
            }
            let row = &self.t[r * self.ncols..r * self.ncols + self.n_struct];
            let mut best: Option<(usize, f64)> = None;
            for (j, &a) in row.iter().enumerate() {
                if self.status[j] != Status::Basic && a.abs() > 1e-7 && best.is_none_or(|(_, ba)| a.abs() > ba) {
                    best = Some((j, a.abs()));
                }
            }
            if let Some((j, _)) = best {
                // The artificial sits at (numerically) zero: a degenerate exchange.
                self.x[b] = 0.0;
                self.status[b] = Status::AtLower;
                self.pivot(r, j);
            }
        }
    }
}
