//! Dense two-phase simplex for the small linear programs in this crate.
//!
//! Problems here have at most a few hundred rows and a few dozen structural
//! variables, so a full tableau is the simplest thing that is exact enough.
//! Pivoting uses Dantzig's rule with a two-pass (Harris) ratio test and
//! switches to Bland's rule after a run of degenerate pivots. The tableau is
//! rebuilt from the original data by an LU solve of the basis every
//! `REFACTOR_EVERY` pivots and once more at each claimed optimum; a basis that
//! turns out primal infeasible after the rebuild is repaired by dual simplex
//! pivots before the primal loop resumes.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("is infeasible")]
    Infeasible,
    #[error("is unbounded")]
    Unbounded,
    #[error("hit the pivot limit")]
    IterationLimit,
    #[error("has a singular basis")]
    Singular,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    maximize: bool,
    cost: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<Row>,
}

/// How an original variable is expressed through nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    Shift { col: usize, lo: f64 },
    Reflect { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

const MAX_PIVOTS: usize = 50_000;
const DEGENERATE_RUN: usize = 64;
const REFACTOR_EVERY: usize = 50;
const MAX_REPAIRS: usize = 8;
/// Slack allowed on basic values by the ratio test.
const FEAS_TOL: f64 = 1e-11;
/// Infeasibility tolerated in a rebuilt basis before dual repair kicks in.
const ACCEPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Reduced cost, relative to the largest cost, below which an unbounded
/// direction is treated as flat.
const RAY_COST_TOL: f64 = 1e-7;

impl LinearProgram {
    pub fn minimize() -> Self {
        LinearProgram {
            maximize: false,
            cost: Vec::new(),
            bounds: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn maximize() -> Self {
        LinearProgram {
            maximize: true,
            ..Self::minimize()
        }
    }

    /// Adds a variable with objective coefficient `cost` and bounds `[lo, hi]`
    /// (either may be infinite). Returns its index.
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        assert!(lo <= hi, "empty bounds [{lo}, {hi}]");
        self.cost.push(cost);
        self.bounds.push((lo, hi));
        self.cost.len() - 1
    }

    pub fn add_free_var(&mut self, cost: f64) -> usize {
        self.add_var(cost, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|(j, a)| *j < self.cost.len() && a.is_finite()));
        debug_assert!(rhs.is_finite());
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let mut maps = Vec::with_capacity(self.cost.len());
        let mut ncols = 0usize;
        let mut extra_rows: Vec<Row> = Vec::new();
        for &(lo, hi) in &self.bounds {
            let map = if lo.is_finite() {
                let col = ncols;
                ncols += 1;
                if hi.is_finite() {
                    extra_rows.push(Row {
                        coeffs: vec![(col, 1.0)],
                        relation: Relation::Le,
                        rhs: hi - lo,
                    });
                }
                ColumnMap::Shift { col, lo }
            } else if hi.is_finite() {
                let col = ncols;
                ncols += 1;
                ColumnMap::Reflect { col, hi }
            } else {
                let pos = ncols;
                ncols += 2;
                ColumnMap::Split { pos, neg: pos + 1 }
            };
            maps.push(map);
        }

        // Rows in tableau-column space with rhs >= 0.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(self.rows.len() + extra_rows.len());
        for row in &self.rows {
            let mut dense = vec![0.0; ncols];
            let mut rhs = row.rhs;
            for &(j, a) in &row.coeffs {
                match maps[j] {
                    ColumnMap::Shift { col, lo } => {
                        dense[col] += a;
                        rhs -= a * lo;
                    }
                    ColumnMap::Reflect { col, hi } => {
                        dense[col] -= a;
                        rhs -= a * hi;
                    }
                    ColumnMap::Split { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                }
            }
            rows.push((dense, row.relation, rhs));
        }
        for row in extra_rows {
            let mut dense = vec![0.0; ncols];
            dense[row.coeffs[0].0] = 1.0;
            rows.push((dense, row.relation, row.rhs));
        }
        for (dense, rel, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                dense.iter_mut().for_each(|a| *a = -*a);
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        // Minimisation cost on tableau columns.
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let mut cost = vec![0.0; ncols];
        for (j, map) in maps.iter().enumerate() {
            let c = sign * self.cost[j];
            match *map {
                ColumnMap::Shift { col, .. } => cost[col] += c,
                ColumnMap::Reflect { col, .. } => cost[col] -= c,
                ColumnMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut tableau = Tableau::new(&rows, ncols);
        tableau.run_phase_one()?;
        tableau.run_phase_two(&cost)?;
        let y = tableau.primal_values();

        let x: Vec<f64> = maps
            .iter()
            .map(|map| match *map {
                ColumnMap::Shift { col, lo } => lo + y[col],
                ColumnMap::Reflect { col, hi } => hi - y[col],
                ColumnMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: tableau.pivots,
        })
    }
}

struct Tableau {
    /// `rows + 1` rows of `width` entries; the last row holds reduced costs,
    /// the last column the right-hand side.
    data: Vec<f64>,
    /// The initial constraint rows, kept for refactorisation.
    original: Vec<f64>,
    rows: usize,
    width: usize,
    structural: usize,
    artificial_start: usize,
    basis: Vec<usize>,
    pivots: usize,
    since_refactor: usize,
    has_artificial: bool,
    cost: Vec<f64>,
}

impl Tableau {
    fn new(rows: &[(Vec<f64>, Relation, f64)], ncols: usize) -> Self {
        let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = ncols + nslack;
        let total = artificial_start + nart;
        let width = total + 1;
        let m = rows.len();
        let mut data = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let mut slack = ncols;
        let mut art = artificial_start;
        for (i, (dense, rel, rhs)) in rows.iter().enumerate() {
            let r = &mut data[i * width..(i + 1) * width];
            r[..ncols].copy_from_slice(dense);
            r[total] = *rhs;
            match rel {
                Relation::Le => {
                    r[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    r[slack] = -1.0;
                    slack += 1;
                    r[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    r[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            original: data[..m * width].to_vec(),
            data,
            rows: m,
            width,
            structural: ncols,
            artificial_start,
            basis,
            pivots: 0,
            since_refactor: 0,
            has_artificial: nart > 0,
            cost: vec![0.0; total],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn feas_tol(&self) -> f64 {
        FEAS_TOL
    }

    fn set_objective(&mut self, cost: &[f64]) {
        self.cost = cost.to_vec();
        self.cost.resize(self.width - 1, 0.0);
        self.refresh_objective_row();
    }

    fn refresh_objective_row(&mut self) {
        let obj = self.rows;
        let w = self.width;
        for j in 0..w {
            self.data[obj * w + j] = if j < self.cost.len() { self.cost[j] } else { 0.0 };
        }
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    let v = self.data[i * w + j];
                    self.data[obj * w + j] -= cb * v;
                }
            }
        }
        for &b in &self.basis {
            self.data[obj * w + b] = 0.0;
        }
    }

    /// Rebuilds `B^-1 [A | b]` from the original rows.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.rows;
        let w = self.width;
        if m == 0 {
            return Ok(());
        }
        let b = DMatrix::from_fn(m, m, |i, k| self.original[i * w + self.basis[k]]);
        let lu = b.lu();
        let full = DMatrix::from_fn(m, w, |i, j| self.original[i * w + j]);
        let solved = lu.solve(&full).ok_or(LpError::Singular)?;
        if solved.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Singular);
        }
        for i in 0..m {
            for j in 0..w {
                self.data[i * w + j] = solved[(i, j)];
            }
            for (k, &bk) in self.basis.iter().enumerate() {
                self.data[i * w + bk] = if k == i { 1.0 } else { 0.0 };
            }
        }
        self.refresh_objective_row();
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        let inv = 1.0 / p;
        for j in 0..w {
            self.data[pr * w + j] *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == pr {
                continue;
            }
            let f = self.data[i * w + pc];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    fn cost_scale(&self, enterable: usize) -> f64 {
        self.cost[..enterable].iter().fold(1.0f64, |m, c| m.max(c.abs()))
    }

    fn cost_tol(&self, enterable: usize) -> f64 {
        1e-11 * self.cost_scale(enterable)
    }

    /// Primal simplex over columns `0..enterable` from a primal feasible basis.
    fn primal_loop(&mut self, enterable: usize) -> Result<(), LpError> {
        let obj = self.rows;
        let rhs = self.rhs_col();
        let eps_cost = self.cost_tol(enterable);
        let tol = self.feas_tol();
        let mut degenerate = 0usize;
        let mut flat: Vec<usize> = Vec::new();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit);
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -eps_cost;
            for j in 0..enterable {
                let d = self.at(obj, j);
                if d < best && !flat.contains(&j) {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            // Harris pass 1: largest step with every basic value >= -tol.
            let mut theta = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    theta = theta.min((self.at(i, rhs).max(0.0) + tol) / a);
                }
            }
            if theta == f64::INFINITY {
                // A ray whose reduced cost is at rounding level is flat, not
                // improving; confirm on a rebuilt tableau before giving up.
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                if self.at(obj, pc) > -RAY_COST_TOL * self.cost_scale(enterable) {
                    flat.push(pc);
                    continue;
                }
                return Err(LpError::Unbounded);
            }
            // Pass 2: among rows blocking within that step, the largest pivot.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL && self.at(i, rhs).max(0.0) / a <= theta {
                    let better = match leave {
                        None => true,
                        Some((li, la)) => {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                a > la
                            }
                        }
                    };
                    if better {
                        leave = Some((i, a));
                    }
                }
            }
            let (pr, a) = leave.expect("a row attains the Harris bound");
            if self.at(pr, rhs).max(0.0) / a <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
            flat.clear();
            if self.at(pr, rhs) < 0.0 {
                self.data[pr * self.width + rhs] = 0.0;
            }
        }
    }

    /// Dual simplex pivots until every basic value is `>= -tol`. Reduced costs
    /// of columns `0..enterable` stay nonnegative up to the cost tolerance.
    fn dual_repair(&mut self, enterable: usize) -> Result<(), LpError> {
        let obj = self.rows;
        let rhs = self.rhs_col();
        let tol = self.feas_tol();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit);
            }
            let mut pr = None;
            let mut worst = -tol;
            for i in 0..self.rows {
                let v = self.at(i, rhs);
                if v < worst {
                    worst = v;
                    pr = Some(i);
                }
            }
            let Some(pr) = pr else {
                return Ok(());
            };
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..enterable {
                let a = self.at(pr, j);
                if a < -PIVOT_TOL {
                    let ratio = self.at(obj, j).max(0.0) / -a;
                    let better = match entering {
                        None => true,
                        Some((_, r, pa)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && -a > pa),
                    };
                    if better {
                        entering = Some((j, ratio, -a));
                    }
                }
            }
            let Some((pc, _, _)) = entering else {
                return Err(LpError::Infeasible);
            };
            self.pivot(pr, pc);
        }
    }

    /// Primal simplex followed by refactorisation and repair until the
    /// rebuilt tableau confirms optimality.
    fn optimise(&mut self, enterable: usize) -> Result<(), LpError> {
        for _ in 0..MAX_REPAIRS {
            self.primal_loop(enterable)?;
            self.refactor()?;
            let tol = ACCEPT_TOL;
            let rhs = self.rhs_col();
            let primal_ok = (0..self.rows).all(|i| self.at(i, rhs) >= -tol);
            let eps_cost = self.cost_tol(enterable);
            let dual_ok = (0..enterable).all(|j| self.at(self.rows, j) >= -eps_cost);
            if primal_ok && dual_ok {
                return Ok(());
            }
            if !primal_ok {
                self.dual_repair(enterable)?;
            }
        }
        Err(LpError::IterationLimit)
    }

    fn run_phase_one(&mut self) -> Result<(), LpError> {
        if !self.has_artificial {
            return Ok(());
        }
        let total = self.width - 1;
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(self.artificial_start) {
            *c = 1.0;
        }
        self.set_objective(&cost);
        self.optimise(total)?;
        let infeas: f64 = (0..self.rows)
            .filter(|&i| self.basis[i] >= self.artificial_start)
            .map(|i| self.at(i, self.rhs_col()))
            .sum();
        if infeas > ACCEPT_TOL {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..self.rows {
            if self.basis[i] >= self.artificial_start {
                let col = (0..self.artificial_start)
                    .filter(|&j| self.at(i, j).abs() > 1e-9)
                    .max_by(|&a, &b| self.at(i, a).abs().partial_cmp(&self.at(i, b).abs()).unwrap());
                if let Some(j) = col {
                    self.pivot(i, j);
                }
            }
        }
        Ok(())
    }

    fn run_phase_two(&mut self, cost: &[f64]) -> Result<(), LpError> {
        self.set_objective(cost);
        let enterable = self.artificial_start;
        self.optimise(enterable)
    }

    fn primal_values(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.structural];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.structural {
                y[b] = self.at(i, self.rhs_col()).max(0.0);
            }
        }
        y
    }
}
