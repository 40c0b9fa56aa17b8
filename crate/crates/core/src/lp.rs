//! Dense two-phase simplex with Bland's rule.
//!
//! Sized for the small programs quadrant geometry needs (tens of variables,
//! a few hundred rows). Maximizes `c·x` subject to linear rows; variables are
//! non-negative unless marked free.

use serde::Serialize;

/// Constraint tolerance at the returned point.
pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub point: Option<Vec<f64>>,
    pub objective: Option<f64>,
}

impl LpResult {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            point: None,
            objective: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
    free: Vec<bool>,
}

impl LinearProgram {
    /// `maximize objective·x`, all variables non-negative.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            n,
            objective,
            rows: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::maximize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n, "row length must match variable count");
        self.rows.push(Row { coeffs, sense, rhs });
        self
    }

    pub fn solve(&self) -> LpResult {
        // Column layout: one column per non-negative variable, two (x⁺, x⁻)
        // per free variable, then slacks/surplus, then artificials.
        let mut col_of = Vec::with_capacity(self.n);
        let mut ncols = 0;
        for &f in &self.free {
            col_of.push(ncols);
            ncols += if f { 2 } else { 1 };
        }
        let n_struct = ncols;

        let m = self.rows.len();
        let mut normalized: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(m);
        for r in &self.rows {
            let mut a = vec![0.0; n_struct];
            for (j, &c) in r.coeffs.iter().enumerate() {
                a[col_of[j]] = c;
                if self.free[j] {
                    a[col_of[j] + 1] = -c;
                }
            }
            let (mut sense, mut rhs) = (r.sense, r.rhs);
            if rhs < 0.0 {
                a.iter_mut().for_each(|x| *x = -*x);
                rhs = -rhs;
                sense = match sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            normalized.push((a, sense, rhs));
        }

        let n_slack = normalized.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
        let n_art = normalized.iter().filter(|(_, s, _)| *s != Sense::Le).count();
        let total = n_struct + n_slack + n_art;
        let art_start = n_struct + n_slack;

        let mut t = Tableau {
            a: vec![vec![0.0; total + 1]; m],
            basis: vec![0; m],
            cost: vec![0.0; total + 1],
            cols: total,
        };
        let (mut si, mut ai) = (n_struct, art_start);
        for (i, (a, sense, rhs)) in normalized.iter().enumerate() {
            t.a[i][..n_struct].copy_from_slice(a);
            t.a[i][total] = *rhs;
            match sense {
                Sense::Le => {
                    t.a[i][si] = 1.0;
                    t.basis[i] = si;
                    si += 1;
                }
                Sense::Ge => {
                    t.a[i][si] = -1.0;
                    t.a[i][ai] = 1.0;
                    t.basis[i] = ai;
                    si += 1;
                    ai += 1;
                }
                Sense::Eq => {
                    t.a[i][ai] = 1.0;
                    t.basis[i] = ai;
                    ai += 1;
                }
            }
        }

        if n_art > 0 {
            let mut c1 = vec![0.0; total];
            c1[art_start..].iter_mut().for_each(|c| *c = -1.0);
            t.price(&c1);
            if t.run(total).is_err() {
                return LpResult::without_point(LpStatus::Infeasible);
            }
            let scale = 1.0
                + normalized
                    .iter()
                    .map(|(_, _, r)| r.abs())
                    .fold(0.0, f64::max);
            if -t.cost[total] > FEAS_TOL * scale {
                return LpResult::without_point(LpStatus::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible;
            // rows where that fails are redundant and stay inert.
            for i in 0..m {
                if t.basis[i] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| t.a[i][j].abs() > PIVOT_TOL) {
                        t.pivot(i, j);
                    }
                }
            }
        }

        let mut c2 = vec![0.0; total];
        for (j, &c) in self.objective.iter().enumerate() {
            c2[col_of[j]] = c;
            if self.free[j] {
                c2[col_of[j] + 1] = -c;
            }
        }
        t.price(&c2);
        match t.run(art_start) {
            Ok(()) => {}
            Err(status) => return LpResult::without_point(status),
        }

        let mut cols = vec![0.0; total];
        for (i, &b) in t.basis.iter().enumerate() {
            cols[b] = t.a[i][total];
        }
        let point: Vec<f64> = (0..self.n)
            .map(|j| {
                let v = cols[col_of[j]];
                if self.free[j] {
                    v - cols[col_of[j] + 1]
                } else {
                    v
                }
            })
            .collect();
        let objective = self.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        LpResult {
            status: LpStatus::Optimal,
            point: Some(point),
            objective: Some(objective),
        }
    }
}

struct Tableau {
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs `z_j − c_j`; the last entry holds the objective value.
    cost: Vec<f64>,
    cols: usize,
}

impl Tableau {
    fn price(&mut self, c: &[f64]) {
        let rhs = self.cols;
        self.cost = vec![0.0; rhs + 1];
        for j in 0..=rhs {
            let z: f64 = self
                .basis
                .iter()
                .enumerate()
                .map(|(i, &b)| c[b] * self.a[i][j])
                .sum();
            self.cost[j] = if j < rhs { z - c[j] } else { z };
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.a[r][col];
        self.a[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                }
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            self.cost.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
        }
        self.basis[r] = col;
    }

    /// Simplex iterations with Bland's rule over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<(), LpStatus> {
        let rhs = self.cols;
        for _ in 0..MAX_ITERS {
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -COST_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let aij = self.a[i][enter];
                if aij > PIVOT_TOL {
                    let ratio = self.a[i][rhs] / aij;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12 * best.abs().max(1.0)
                                || (ratio <= best + 1e-12 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(LpStatus::Unbounded),
                Some((i, _)) => self.pivot(i, enter),
            }
        }
        Err(LpStatus::Infeasible)
    }
}
