//! Dense two-phase simplex method.
//!
//! [`Simplex`] keeps its tableau between calls: the feasible region is fixed
//! at construction and each [`Simplex::maximize`] call only changes the
//! objective, so later calls restart phase II from the previous optimal
//! basis. This is what the conditional-gradient solver needs.

use crate::error::{Error, Result};

/// Linear constraints `A_eq x = b_eq`, `A_le x ≤ b_le`, `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearConstraints {
    dim: usize,
    eq: Vec<(Vec<f64>, f64)>,
    le: Vec<(Vec<f64>, f64)>,
}

impl LinearConstraints {
    pub fn new(dim: usize) -> Self {
        Self { dim, eq: Vec::new(), le: Vec::new() }
    }

    /// The probability simplex in `dim` dimensions.
    pub fn simplex(dim: usize) -> Self {
        let mut c = Self::new(dim);
        c.add_eq(vec![1.0; dim], 1.0);
        c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_eq(&mut self, a: Vec<f64>, b: f64) {
        assert_eq!(a.len(), self.dim, "constraint row has the wrong length");
        self.eq.push((a, b));
    }

    pub fn add_le(&mut self, a: Vec<f64>, b: f64) {
        assert_eq!(a.len(), self.dim, "constraint row has the wrong length");
        self.le.push((a, b));
    }

    /// Largest violation of any constraint at `x`, including `x ≥ 0`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        let eq = self.eq.iter().map(|(a, b)| (dot(a) - b).abs());
        let le = self.le.iter().map(|(a, b)| (dot(a) - b).max(0.0));
        let neg = x.iter().map(|v| (-v).max(0.0));
        eq.chain(le).chain(neg).fold(0.0, f64::max)
    }
}

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;
/// Consecutive (near-)degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;
/// Pivots between recomputations of the reduced costs from the tableau.
const REFRESH_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    constraints: LinearConstraints,
    /// Row-major `rows × (cols + 1)`; the last column is the right-hand side.
    tableau: Vec<f64>,
    rows: usize,
    cols: usize,
    kinds: Vec<Column>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Simplex {
    /// Runs phase I. Fails with [`Error::Infeasible`] when the region is empty.
    pub fn new(constraints: &LinearConstraints) -> Result<Self> {
        let n = constraints.dim;
        let n_le = constraints.le.len();
        let mut rows_data: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::new();
        for (idx, (a, b)) in constraints.le.iter().enumerate() {
            rows_data.push((a.clone(), *b, Some(idx)));
        }
        for (a, b) in &constraints.eq {
            rows_data.push((a.clone(), *b, None));
        }
        // equilibrate: rows with tiny coefficients make tiny pivots
        for (a, b, _) in &mut rows_data {
            let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                a.iter_mut().for_each(|v| *v /= m);
                *b /= m;
            }
        }
        let needs_art: Vec<bool> = rows_data.iter().map(|(_, b, slack)| slack.is_none() || *b < 0.0).collect();
        let n_art = needs_art.iter().filter(|&&x| x).count();
        let cols = n + n_le + n_art;
        let rows = rows_data.len();
        let width = cols + 1;
        let mut tableau = vec![0.0; rows * width];
        let mut kinds = vec![Column::Structural; n];
        kinds.extend(std::iter::repeat_n(Column::Slack, n_le));
        kinds.extend(std::iter::repeat_n(Column::Artificial, n_art));
        let mut basis = vec![0; rows];
        let mut art = n + n_le;
        for (r, (a, b, slack)) in rows_data.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            let row = &mut tableau[r * width..(r + 1) * width];
            for (j, v) in a.iter().enumerate() {
                row[j] = sign * v;
            }
            if let Some(s) = slack {
                row[n + s] = sign;
            }
            row[cols] = sign * b;
            if needs_art[r] {
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = n + slack.expect("slack row");
            }
        }
        let mut lp = Self { constraints: constraints.clone(), tableau, rows, cols, kinds, basis, pivots: 0 };
        if n_art > 0 {
            lp.phase_one()?;
        }
        Ok(lp)
    }

    pub fn dim(&self) -> usize {
        self.constraints.dim
    }

    pub fn constraints(&self) -> &LinearConstraints {
        &self.constraints
    }

    /// Total pivots performed so far.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.tableau[r * self.width() + j]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn phase_one(&mut self) -> Result<()> {
        let cost: Vec<f64> = self.kinds.iter().map(|k| if *k == Column::Artificial { -1.0 } else { 0.0 }).collect();
        let value = self.optimize(&cost, true)?;
        let scale = 1.0 + self.constraints.eq.iter().chain(&self.constraints.le).map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if value < -FEAS_TOL * scale {
            return Err(Error::Infeasible(format!("linear constraints admit no point (phase-one residual {:.3e})", -value)));
        }
        // drive basic artificials out, dropping rows that turn out redundant
        let mut r = 0;
        while r < self.rows {
            if self.kinds[self.basis[r]] == Column::Artificial {
                let entering = (0..self.cols)
                    .find(|&j| self.kinds[j] != Column::Artificial && self.at(r, j).abs() > 1e-9);
                match entering {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        Ok(())
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width();
        self.tableau.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width();
        let p = self.tableau[r * w + j];
        for v in &mut self.tableau[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.tableau[r * w..(r + 1) * w].to_vec();
        for rr in 0..self.rows {
            if rr == r {
                continue;
            }
            let f = self.tableau[rr * w + j];
            if f != 0.0 {
                for (v, pv) in self.tableau[rr * w..(rr + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.tableau[rr * w + j] = 0.0;
            }
        }
        self.basis[r] = j;
        self.pivots += 1;
    }

    /// Ratio test for entering column `j`. Harris's two passes: bound the
    /// step with the right-hand sides relaxed by the feasibility tolerance,
    /// then take the largest pivot within that bound. Under Bland's rule,
    /// ties go to the lowest basic variable index instead.
    fn leaving_row(&self, j: usize, bland: bool) -> Option<(usize, f64)> {
        let candidates = (0..self.rows).filter(|&r| self.at(r, j) > PIVOT_TOL);
        let bound = candidates
            .clone()
            .map(|r| (self.rhs(r).max(0.0) + HARRIS_TOL) / self.at(r, j))
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for r in candidates.filter(|&r| self.rhs(r).max(0.0) / self.at(r, j) <= bound) {
            best = match best {
                None => Some(r),
                Some(b) if bland => Some(if self.basis[r] < self.basis[b] { r } else { b }),
                Some(b) => Some(if self.at(r, j) > self.at(b, j) { r } else { b }),
            };
        }
        best.map(|r| (r, self.rhs(r).max(0.0) / self.at(r, j)))
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut reduced = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (rc, t) in reduced.iter_mut().zip(&self.tableau[r * w..r * w + self.cols]) {
                    *rc -= cb * t;
                }
            }
        }
        reduced
    }

    /// Maximizes `cost · z` over the tableau columns from the current basis.
    fn optimize(&mut self, cost: &[f64], allow_artificial: bool) -> Result<f64> {
        let w = self.width();
        let mut reduced = self.reduced_costs(cost);
        let cscale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
        let tol = 1e-10 * cscale;
        let mut degenerate_run = 0;
        let mut bland = false;
        let mut count = 0;
        loop {
            if count % REFRESH_EVERY == 0 {
                reduced = self.reduced_costs(cost);
            }
            let eligible = |j: usize| allow_artificial || self.kinds[j] != Column::Artificial;
            // once on, Bland's rule stays on: round-off steps of 1e-15 would
            // otherwise reset the run and let the largest-coefficient rule cycle
            bland |= degenerate_run >= DEGENERATE_SWITCH;
            let mut entering = None;
            let mut best = tol;
            for (j, &rc) in reduced.iter().enumerate() {
                if rc > best && eligible(j) {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(j) = entering else { break };
            let Some((r, ratio)) = self.leaving_row(j, bland) else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-11 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            let f = reduced[j];
            self.pivot(r, j);
            let row = &self.tableau[r * w..r * w + self.cols];
            for (rc, t) in reduced.iter_mut().zip(row) {
                *rc -= f * t;
            }
            reduced[j] = 0.0;
            count += 1;
            if count > MAX_PIVOTS {
                return Err(Error::Numerical("simplex exceeded its pivot budget".into()));
            }
        }
        Ok((0..self.rows).map(|r| cost[self.basis[r]] * self.rhs(r)).sum())
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.constraints.dim];
        for r in 0..self.rows {
            let b = self.basis[r];
            if b < self.constraints.dim {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        x
    }

    /// Optimal basic solution of `max c · x` over the region.
    pub fn maximize(&mut self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.constraints.dim {
            return Err(Error::Domain("objective has the wrong length".into()));
        }
        let mut cost = vec![0.0; self.cols];
        cost[..c.len()].copy_from_slice(c);
        self.optimize(&cost, false)?;
        let x = self.solution();
        if self.constraints.max_violation(&x) > FEAS_TOL {
            // accumulated round-off: rebuild the tableau from the original rows
            let fresh = Self::new(&self.constraints)?;
            let pivots = self.pivots;
            *self = fresh;
            self.pivots += pivots;
            self.optimize(&cost, false)?;
            return Ok(self.solution());
        }
        Ok(x)
    }
}

/// One-shot `max c · x` subject to `constraints`.
pub fn lp_oracle(c: &[f64], constraints: &LinearConstraints) -> Result<Vec<f64>> {
    Simplex::new(constraints)?.maximize(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_vertex_is_argmax() {
        let x = lp_oracle(&[0.1, 0.7, 0.3], &LinearConstraints::simplex(3)).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn capped_best_coordinate_spills_to_second_best() {
        let mut c = LinearConstraints::simplex(4);
        c.add_le(vec![0.0, 0.0, 1.0, 0.0], 0.3);
        let x = lp_oracle(&[0.2, 0.5, 0.9, 0.1], &c).unwrap();
        assert!((x[2] - 0.3).abs() < 1e-12 && (x[1] - 0.7).abs() < 1e-12);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let x = lp_oracle(&[0.0, 1.0, 1.0, 1.0], &LinearConstraints::simplex(4)).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut c = LinearConstraints::simplex(2);
        c.add_le(vec![1.0, 1.0], 0.5);
        assert!(matches!(lp_oracle(&[1.0, 0.0], &c), Err(Error::Infeasible(_))));
        let mut open = LinearConstraints::new(2);
        open.add_le(vec![1.0, -1.0], 1.0);
        assert!(matches!(lp_oracle(&[0.0, 1.0], &open), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut c = LinearConstraints::simplex(3);
        c.add_eq(vec![2.0, 2.0, 2.0], 2.0);
        c.add_eq(vec![1.0, -1.0, 0.0], 0.0);
        let x = lp_oracle(&[0.0, 0.0, 1.0], &c).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
        let x = lp_oracle(&[1.0, 0.0, 0.0], &c).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn warm_restart_matches_cold_solves() {
        let mut c = LinearConstraints::simplex(5);
        c.add_le(vec![0.0, 1.0, 4.0, 9.0, 16.0], 5.0);
        let mut warm = Simplex::new(&c).unwrap();
        for obj in [[1.0, 2.0, 3.0, 4.0, 5.0], [5.0, 1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 1.0, 3.0, 2.0]] {
            let a = warm.maximize(&obj).unwrap();
            let b = lp_oracle(&obj, &c).unwrap();
            let va: f64 = a.iter().zip(&obj).map(|(x, y)| x * y).sum();
            let vb: f64 = b.iter().zip(&obj).map(|(x, y)| x * y).sum();
            assert!((va - vb).abs() < 1e-12);
            assert!(c.max_violation(&a) < 1e-12);
        }
    }
}
