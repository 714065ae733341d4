//! Dense two-phase revised simplex for `min cᵀx` subject to linear
//! constraints and `x ≥ 0`.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations after each pivot, and rebuilt from scratch when the primal
//! residual drifts. Pricing uses the largest reduced cost; after a long run
//! of degenerate pivots the solver falls back to Bland's smallest-index
//! rule until progress resumes, which rules out cycling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }

    /// Amount by which `x` violates this constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `min objectiveᵀx` over `x ≥ 0` subject to `constraints`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.num_vars();
        if !self.objective.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("LP objective"));
        }
        for c in &self.constraints {
            if c.coeffs.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "LP constraint row",
                    expected: m,
                    found: c.coeffs.len(),
                });
            }
            if !c.rhs.is_finite() || !c.coeffs.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("LP constraint"));
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x`, including negativity.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bound = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        self.constraints
            .iter()
            .fold(bound, |m, c| m.max(c.violation(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of [`simplex_solve`].
///
/// For an infeasible program `x` is the phase-one point (the one that
/// minimizes total infeasibility) and `objective_value` is `+∞`; for an
/// unbounded program `x` is the last basic feasible solution and the
/// objective is `−∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    pub pivots: usize,
}

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const CHECK_EVERY: usize = 50;
const DEGENERATE_RUN: usize = 50;

pub fn simplex_solve(prob: &LpProblem) -> Result<LpSolution> {
    prob.validate()?;
    let mut tableau = Revised::new(prob);
    tableau.run()
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Col {
    Structural(usize),
    /// Slack or surplus on a row, with its sign.
    Slack(usize, f64),
    Artificial(usize),
}

struct Revised<'a> {
    prob: &'a LpProblem,
    m: usize,
    nv: usize,
    /// Row-major structural coefficients after sign normalization.
    a: Vec<f64>,
    b: Vec<f64>,
    cols: Vec<Col>,
    n_artificial_start: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    x_b: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    max_pivots: usize,
}

impl<'a> Revised<'a> {
    fn new(prob: &'a LpProblem) -> Self {
        let m = prob.constraints.len();
        let nv = prob.num_vars();
        let mut a = Vec::with_capacity(m * nv);
        let mut b = Vec::with_capacity(m);
        let mut relations = Vec::with_capacity(m);
        for c in &prob.constraints {
            let flip = c.rhs < 0.0 || (c.rhs == 0.0 && c.relation == Relation::Ge);
            let s = if flip { -1.0 } else { 1.0 };
            a.extend(c.coeffs.iter().map(|v| s * v));
            b.push(s * c.rhs);
            relations.push(match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            });
        }

        let mut cols: Vec<Col> = (0..nv).map(Col::Structural).collect();
        let mut basis = vec![usize::MAX; m];
        for (i, rel) in relations.iter().enumerate() {
            match rel {
                Relation::Le => {
                    basis[i] = cols.len();
                    cols.push(Col::Slack(i, 1.0));
                }
                Relation::Ge => cols.push(Col::Slack(i, -1.0)),
                Relation::Eq => {}
            }
        }
        let n_artificial_start = cols.len();
        for (i, rel) in relations.iter().enumerate() {
            if *rel != Relation::Le {
                basis[i] = cols.len();
                cols.push(Col::Artificial(i));
            }
        }
        let mut is_basic = vec![false; cols.len()];
        for &j in &basis {
            is_basic[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let x_b = b.clone();
        let max_pivots = 50 * (m + cols.len()) + 1000;
        Self {
            prob,
            m,
            nv,
            a,
            b,
            cols,
            n_artificial_start,
            basis,
            is_basic,
            binv,
            x_b,
            pivots: 0,
            since_refactor: 0,
            max_pivots,
        }
    }

    fn run(&mut self) -> Result<LpSolution> {
        let has_artificials = self.n_artificial_start < self.cols.len();
        if has_artificials {
            let phase_one_cost: Vec<f64> = (0..self.cols.len())
                .map(|j| if j >= self.n_artificial_start { 1.0 } else { 0.0 })
                .collect();
            let status = self.optimize(&phase_one_cost, true)?;
            debug_assert_eq!(status, LpStatus::Optimal, "phase one is bounded below");
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.x_b)
                .filter(|(j, _)| **j >= self.n_artificial_start)
                .map(|(_, v)| v.max(0.0))
                .sum();
            let scale = self.b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if infeasibility > FEAS_TOL * scale {
                return Ok(LpSolution {
                    x: self.structural_x(),
                    objective_value: f64::INFINITY,
                    status: LpStatus::Infeasible,
                    pivots: self.pivots,
                });
            }
            self.drive_out_artificials()?;
        }
        let mut cost = vec![0.0; self.cols.len()];
        cost[..self.nv].copy_from_slice(&self.prob.objective);
        let status = self.optimize(&cost, false)?;
        let x = self.structural_x();
        let objective_value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => x.iter().zip(&self.prob.objective).map(|(x, c)| x * c).sum(),
        };
        Ok(LpSolution {
            x,
            objective_value,
            status,
            pivots: self.pivots,
        })
    }

    fn structural_x(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.nv];
        for (k, &j) in self.basis.iter().enumerate() {
            if let Col::Structural(v) = self.cols[j] {
                x[v] = self.x_b[k].max(0.0);
            }
        }
        x
    }

    /// Gathers column `j` of the standard-form matrix into `out`.
    fn column_into(&self, j: usize, out: &mut [f64]) {
        match self.cols[j] {
            Col::Structural(v) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.a[i * self.nv + v];
                }
            }
            Col::Slack(r, s) => {
                out.fill(0.0);
                out[r] = s;
            }
            Col::Artificial(r) => {
                out.fill(0.0);
                out[r] = 1.0;
            }
        }
    }

    /// `B⁻¹·A_j`
    fn ftran(&self, j: usize, work: &mut [f64], alpha: &mut [f64]) {
        let m = self.m;
        match self.cols[j] {
            Col::Structural(_) => {
                self.column_into(j, work);
                for (k, ak) in alpha.iter_mut().enumerate() {
                    let row = &self.binv[k * m..(k + 1) * m];
                    *ak = row.iter().zip(work.iter()).map(|(x, y)| x * y).sum();
                }
            }
            Col::Slack(r, s) => {
                for (k, ak) in alpha.iter_mut().enumerate() {
                    *ak = s * self.binv[k * m + r];
                }
            }
            Col::Artificial(r) => {
                for (k, ak) in alpha.iter_mut().enumerate() {
                    *ak = self.binv[k * m + r];
                }
            }
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, r) in y.iter_mut().zip(row) {
                    *yi += cb * r;
                }
            }
        }
        y
    }

    /// Reduced costs of every column (basic columns get 0).
    fn reduced_costs(&self, cost: &[f64], y: &[f64], phase_one: bool, d: &mut [f64]) {
        let nv = self.nv;
        let mut ya = vec![0.0; nv];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                let row = &self.a[i * nv..(i + 1) * nv];
                for (acc, v) in ya.iter_mut().zip(row) {
                    *acc += yi * v;
                }
            }
        }
        for (j, dj) in d.iter_mut().enumerate() {
            if self.is_basic[j] {
                *dj = 0.0;
                continue;
            }
            *dj = match self.cols[j] {
                Col::Structural(v) => cost[j] - ya[v],
                Col::Slack(r, s) => cost[j] - s * y[r],
                // Artificials may only leave the basis once phase one is over.
                Col::Artificial(r) if phase_one => cost[j] - y[r],
                Col::Artificial(_) => 0.0,
            };
        }
    }

    fn optimize(&mut self, cost: &[f64], phase_one: bool) -> Result<LpStatus> {
        let m = self.m;
        let ncols = self.cols.len();
        let mut y = self.duals(cost);
        let mut d = vec![0.0; ncols];
        let mut alpha = vec![0.0; m];
        let mut work = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let mut verified = false;

        loop {
            if self.pivots >= self.max_pivots {
                return Err(Error::IterationLimit(self.max_pivots));
            }
            self.reduced_costs(cost, &y, phase_one, &mut d);
            let bland = degenerate_run >= DEGENERATE_RUN;
            let entering = if bland {
                (0..ncols).find(|&j| d[j] < -OPT_TOL)
            } else {
                let mut best = None;
                let mut best_d = -OPT_TOL;
                for (j, &dj) in d.iter().enumerate() {
                    if dj < best_d {
                        best_d = dj;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(q) = entering else {
                // Confirm optimality against a freshly factored basis when
                // the updated inverse has drifted.
                if verified || self.since_refactor == 0 || !self.residual_drift() {
                    return Ok(LpStatus::Optimal);
                }
                self.refactor()?;
                y = self.duals(cost);
                verified = true;
                continue;
            };
            verified = false;

            self.ftran(q, &mut work, &mut alpha);
            let Some(r) = self.ratio_test(&alpha, bland) else {
                return Ok(LpStatus::Unbounded);
            };
            let step = (self.x_b[r] / alpha[r]).max(0.0);
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(q, r, &alpha, step);
            // Dual update: y += d_q · (row r of the new inverse).
            let dq = d[q];
            let row = &self.binv[r * m..(r + 1) * m];
            for (yi, v) in y.iter_mut().zip(row) {
                *yi += dq * v;
            }

            if self.since_refactor % CHECK_EVERY == 0 && self.residual_drift() {
                self.refactor()?;
                y = self.duals(cost);
            } else if self.since_refactor % CHECK_EVERY == 0 {
                y = self.duals(cost);
            }
        }
    }

    fn ratio_test(&self, alpha: &[f64], bland: bool) -> Option<usize> {
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for (k, &ak) in alpha.iter().enumerate() {
                if ak > PIVOT_TOL {
                    let ratio = self.x_b[k].max(0.0) / ak;
                    best = match best {
                        None => Some((k, ratio)),
                        Some((bk, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[k] < self.basis[bk])
                            {
                                Some((k, ratio))
                            } else {
                                Some((bk, br))
                            }
                        }
                    };
                }
            }
            return best.map(|(k, _)| k);
        }
        // Harris two-pass test: bound the step with a small feasibility
        // allowance, then take the largest pivot among rows within it.
        let mut bound = f64::INFINITY;
        for (k, &ak) in alpha.iter().enumerate() {
            if ak > PIVOT_TOL {
                bound = bound.min((self.x_b[k].max(0.0) + FEAS_TOL) / ak);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let mut best: Option<usize> = None;
        for (k, &ak) in alpha.iter().enumerate() {
            if ak > PIVOT_TOL && self.x_b[k].max(0.0) / ak <= bound {
                if best.map_or(true, |b| ak > alpha[b]) {
                    best = Some(k);
                }
            }
        }
        best
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &[f64], step: f64) {
        let m = self.m;
        for (k, xk) in self.x_b.iter_mut().enumerate() {
            if k != r {
                *xk -= step * alpha[k];
                if *xk < 0.0 && *xk > -FEAS_TOL {
                    *xk = 0.0;
                }
            }
        }
        self.x_b[r] = step;

        let inv = 1.0 / alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        pivot_row.iter_mut().for_each(|v| *v *= inv);
        for (k, chunk) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                chunk.iter_mut().zip(pivot_row.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }
        for (k, chunk) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                chunk.iter_mut().zip(pivot_row.iter()).for_each(|(v, p)| *v -= f * p);
            }
        }

        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// True when `‖B·x_B − b‖∞` has grown beyond tolerance.
    fn residual_drift(&self) -> bool {
        let mut resid = self.b.clone();
        let mut col = vec![0.0; self.m];
        for (k, &j) in self.basis.iter().enumerate() {
            let v = self.x_b[k];
            if v == 0.0 {
                continue;
            }
            self.column_into(j, &mut col);
            for (ri, ci) in resid.iter_mut().zip(&col) {
                *ri -= ci * v;
            }
        }
        let scale = self.b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        resid.iter().any(|r| r.abs() > 1e-9 * scale)
    }

    /// Rebuilds `B⁻¹` by Gauss–Jordan elimination with partial pivoting and
    /// recomputes `x_B = B⁻¹b`.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.column_into(j, &mut col);
            for i in 0..m {
                bmat[i * m + k] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (mut piv, mut best) = (c, bmat[c * m + c].abs());
            for i in c + 1..m {
                let v = bmat[i * m + c].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < PIVOT_TOL {
                return Err(Error::NumericalBreakdown(best));
            }
            if piv != c {
                for k in 0..m {
                    bmat.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = 1.0 / bmat[c * m + c];
            for k in 0..m {
                bmat[c * m + k] *= d;
                inv[c * m + k] *= d;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = bmat[i * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    bmat[i * m + k] -= f * bmat[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&self.b).map(|(x, y)| x * y).sum();
            self.x_b[k] = if v < 0.0 && v > -FEAS_TOL { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Pivots zero-level artificial variables out of the basis where a
    /// non-artificial column can replace them. Rows where none can are
    /// redundant; their artificial stays basic at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let mut work = vec![0.0; m];
        for r in 0..m {
            if self.basis[r] < self.n_artificial_start {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_artificial_start {
                if self.is_basic[j] {
                    continue;
                }
                self.column_into(j, &mut work);
                let v: f64 = row.iter().zip(&work).map(|(x, y)| x * y).sum();
                if v.abs() > 1e-7 && best.map_or(true, |(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((q, _)) = best {
                self.ftran(q, &mut work, &mut alpha);
                let step = self.x_b[r] / alpha[r];
                self.pivot(q, r, &alpha, step);
            }
        }
        if self.since_refactor > 0 && self.residual_drift() {
            self.refactor()?;
        }
        Ok(())
    }
}
