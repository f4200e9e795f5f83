//! Dense two-phase primal simplex with dual recovery.
//!
//! Sized for the occupation-measure programs built in [`crate::lp`]: a few
//! hundred columns and rows. Dantzig pricing with a permanent switch to
//! Bland's rule after a run of degenerate pivots. The final basis is
//! re-solved with an LU factorization so that primal values and duals are
//! accurate to working precision rather than carrying tableau drift.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `maximize objective · x` subject to `constraints`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// One multiplier per constraint: the rate of change of the optimum per
    /// unit of right-hand side. Nonnegative on `Le` rows, nonpositive on `Ge`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
const MAX_ITERS: usize = 200_000;

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last column is the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    value: f64,
    iterations: usize,
    bland: bool,
    degenerate: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= piv;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.reduced[pc];
        if f != 0.0 {
            for (x, p) in self.reduced.iter_mut().zip(&prow[..self.cols]) {
                *x -= f * p;
            }
            self.reduced[pc] = 0.0;
            self.value += f * prow[self.cols];
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Sets reduced costs for `cost` given the current basis.
    fn price(&mut self, cost: &[f64]) {
        self.reduced = cost.to_vec();
        self.value = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..self.cols {
                    self.reduced[c] -= cb * self.at(r, c);
                }
                self.value += cb * self.rhs(r);
            }
        }
    }

    /// Runs simplex iterations on the current reduced costs. Returns false
    /// if the objective is unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> Result<bool, String> {
        loop {
            if self.iterations > MAX_ITERS {
                return Err("iteration limit reached".into());
            }
            let entering = if self.bland {
                (0..self.cols).find(|&c| allowed[c] && self.reduced[c] > COST_TOL)
            } else {
                let mut best = None;
                let mut best_val = COST_TOL;
                for c in 0..self.cols {
                    if allowed[c] && self.reduced[c] > best_val {
                        best_val = self.reduced[c];
                        best = Some(c);
                    }
                }
                best
            };
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate > DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                self.degenerate = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves `lp` to optimality, or reports infeasibility/unboundedness.
pub fn solve(lp: &LinearProgram) -> Result<Solution, String> {
    let n = lp.num_vars;
    let m = lp.constraints.len();
    if lp.objective.len() != n {
        return Err("objective length does not match variable count".into());
    }

    // normalize to rhs >= 0
    let mut sign = vec![1.0; m];
    let mut kinds = Vec::with_capacity(m);
    for (r, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.iter().any(|&(j, _)| j >= n) {
            return Err(format!("constraint {r} references a missing variable"));
        }
        let mut kind = c.kind;
        if c.rhs < 0.0 {
            sign[r] = -1.0;
            kind = match kind {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            };
        }
        kinds.push(kind);
    }

    let n_slack = kinds.iter().filter(|k| **k != RowKind::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != RowKind::Le).count();
    let cols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut next_slack = n;
    let mut next_art = art_start;
    for (r, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            data[r * w + j] += sign[r] * a;
        }
        data[r * w + cols] = sign[r] * c.rhs;
        match kinds[r] {
            RowKind::Le => {
                data[r * w + next_slack] = 1.0;
                basis[r] = next_slack;
                next_slack += 1;
            }
            RowKind::Ge => {
                data[r * w + next_slack] = -1.0;
                next_slack += 1;
                data[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
            RowKind::Eq => {
                data[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
    }

    let mut t = Tableau {
        rows: m,
        cols,
        data,
        basis,
        reduced: Vec::new(),
        value: 0.0,
        iterations: 0,
        bland: false,
        degenerate: 0,
    };

    let infeasible = |iterations| Solution {
        status: Status::Infeasible,
        x: vec![0.0; n],
        duals: vec![0.0; m],
        objective: f64::NAN,
        iterations,
    };

    // phase 1: maximize -sum(artificials)
    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        cost1[art_start..].fill(-1.0);
        t.price(&cost1);
        let allowed = vec![true; cols];
        t.optimize(&allowed)?;
        if t.value < -FEAS_TOL {
            return Ok(infeasible(t.iterations));
        }
        // drive zero-valued artificials out of the basis
        for r in 0..m {
            if t.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| t.at(r, c).abs() > 1e-9) {
                    t.pivot(r, c);
                }
            }
        }
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    t.price(&cost);
    t.bland = false;
    t.degenerate = 0;
    let allowed: Vec<bool> = (0..cols).map(|c| c < art_start).collect();
    if !t.optimize(&allowed)? {
        return Ok(Solution {
            status: Status::Unbounded,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            objective: f64::INFINITY,
            iterations: t.iterations,
        });
    }

    // Re-solve the final basis: B x_B = b, B^T y = c_B.
    let mut full = vec![0.0; m * cols];
    {
        let mut next_slack = n;
        let mut next_art = art_start;
        for (r, c) in lp.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                full[r * cols + j] += sign[r] * a;
            }
            match kinds[r] {
                RowKind::Le => {
                    full[r * cols + next_slack] = 1.0;
                    next_slack += 1;
                }
                RowKind::Ge => {
                    full[r * cols + next_slack] = -1.0;
                    next_slack += 1;
                    full[r * cols + next_art] = 1.0;
                    next_art += 1;
                }
                RowKind::Eq => {
                    full[r * cols + next_art] = 1.0;
                    next_art += 1;
                }
            }
        }
    }
    let b = DVector::from_iterator(m, lp.constraints.iter().enumerate().map(|(r, c)| sign[r] * c.rhs));
    let bmat = DMatrix::from_fn(m, m, |r, k| full[r * cols + t.basis[k]]);
    let cb = DVector::from_iterator(m, t.basis.iter().map(|&c| cost[c]));
    let lu = bmat.clone().lu();
    let (xb, y) = match (lu.solve(&b), bmat.transpose().lu().solve(&cb)) {
        (Some(xb), Some(y)) if m > 0 => (xb, y),
        _ => {
            // fall back to the tableau (also covers m == 0)
            let xb = DVector::from_iterator(m, (0..m).map(|r| t.rhs(r)));
            let y = DVector::zeros(m);
            (xb, y)
        }
    };

    let mut x = vec![0.0; n];
    for (r, &c) in t.basis.iter().enumerate() {
        if c < n {
            let v = xb[r];
            x[c] = if v < 0.0 && v > -FEAS_TOL { 0.0 } else { v };
        }
    }
    let duals: Vec<f64> = (0..m).map(|r| sign[r] * y[r]).collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(Solution {
        status: Status::Optimal,
        x,
        duals,
        objective,
        iterations: t.iterations,
    })
}

impl LinearProgram {
    /// Dual objective `sum_r rhs_r * y_r`.
    pub fn dual_objective(&self, duals: &[f64]) -> f64 {
        self.constraints.iter().zip(duals).map(|(c, y)| c.rhs * y).sum()
    }

    /// Largest violation of any constraint or of `x >= 0`.
    pub fn max_primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0_f64, |w, v| w.max(-v));
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match c.kind {
                RowKind::Le => lhs - c.rhs,
                RowKind::Ge => c.rhs - lhs,
                RowKind::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Largest violation of dual feasibility: reduced costs `c_j - A_j^T y`
    /// must be `<= 0`, and row multipliers must have the right sign.
    pub fn max_dual_residual(&self, duals: &[f64]) -> f64 {
        let mut reduced = self.objective.clone();
        let mut worst = 0.0_f64;
        for (c, &y) in self.constraints.iter().zip(duals) {
            for &(j, a) in &c.coeffs {
                reduced[j] -= a * y;
            }
            worst = worst.max(match c.kind {
                RowKind::Le => -y,
                RowKind::Ge => y,
                RowKind::Eq => 0.0,
            });
        }
        reduced.iter().fold(worst, |w, r| w.max(*r))
    }
}
