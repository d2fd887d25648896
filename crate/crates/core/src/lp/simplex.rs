//! Dense two-phase primal simplex over a generic scalar.
//!
//! The float instantiation is the fast path used by the pipeline; the
//! `BigRational` instantiation gives exact optima for oracle tests. Pivoting
//! uses Dantzig's rule. After a run of degenerate pivots the exact path
//! switches permanently to Bland's rule, which rules out cycling; the float
//! path instead perturbs the right-hand sides, solves the perturbed problem,
//! then removes the perturbation and repairs feasibility with dual pivots. The ratio test is Harris's
//! two-pass variant: among rows whose ratio is within a small feasibility
//! slack of the minimum it pivots on the largest element. The float path
//! recomputes the final basic solution from the original rows, so drift in
//! the tableau never reaches the returned point.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

/// Feasibility residual allowed on a float solution.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Magnitudes at or below this count as zero when pivoting.
    fn eps() -> Self;
    /// Reduced costs at or below this count as optimal.
    fn optimality_tolerance() -> Self;
    /// Smallest acceptable pivot element.
    fn pivot_tolerance() -> Self;
    /// Primal infeasibility the Harris ratio test may introduce.
    fn harris_slack() -> Self;
    /// Whether to recompute the final point from the original rows.
    fn refactor() -> bool;
    /// Largest constraint violation accepted on the returned point.
    fn residual_tolerance() -> Self;
    /// Snaps pivoting noise to zero; identity for exact types.
    fn clean(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn eps() -> Self {
        1e-11
    }
    fn optimality_tolerance() -> Self {
        1e-9
    }
    fn pivot_tolerance() -> Self {
        1e-9
    }
    fn harris_slack() -> Self {
        1e-10
    }
    fn refactor() -> bool {
        true
    }
    fn residual_tolerance() -> Self {
        RESIDUAL_TOLERANCE
    }
    fn clean(self) -> Self {
        if self.abs() < 1e-13 {
            0.0
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite coefficient")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn eps() -> Self {
        Zero::zero()
    }
    fn optimality_tolerance() -> Self {
        Zero::zero()
    }
    fn pivot_tolerance() -> Self {
        Zero::zero()
    }
    fn harris_slack() -> Self {
        Zero::zero()
    }
    fn refactor() -> bool {
        false
    }
    fn residual_tolerance() -> Self {
        Zero::zero()
    }
    fn clean(self) -> Self {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Row<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// `max` (or `min`) `objective · x` subject to `rows`, `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<Row<T>>,
    pub maximize: bool,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("linear program is infeasible (phase-one optimum {phase_one})")]
    Infeasible { phase_one: f64 },
    #[error("linear program is unbounded along column {column}")]
    Unbounded { column: usize },
    #[error("simplex numerical failure: max residual {max_residual:e} on {location}")]
    NumericalFailure { max_residual: f64, location: String },
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(num_vars: usize, objective: Vec<T>, maximize: bool) -> Self {
        assert_eq!(objective.len(), num_vars);
        Self {
            num_vars,
            objective,
            rows: Vec::new(),
            maximize,
        }
    }

    pub fn push(&mut self, coeffs: Vec<(usize, T)>, sense: Sense, rhs: T) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars));
        self.rows.push(Row { coeffs, sense, rhs });
    }

    /// Largest violation of any row or sign constraint at `x`, with its location.
    pub fn max_violation(&self, x: &[T]) -> (T, String) {
        let mut worst = T::zero();
        let mut location = String::from("none");
        for (j, xj) in x.iter().enumerate() {
            let v = -xj.clone();
            if v > worst {
                worst = v;
                location = format!("sign of x{j}");
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let lhs = row
                .coeffs
                .iter()
                .fold(T::zero(), |acc, (j, a)| acc + a.clone() * x[*j].clone());
            let v = match row.sense {
                Sense::Le => lhs - row.rhs.clone(),
                Sense::Ge => row.rhs.clone() - lhs,
                Sense::Eq => {
                    let d = lhs - row.rhs.clone();
                    if d < T::zero() {
                        -d
                    } else {
                        d
                    }
                }
            };
            if v > worst {
                worst = v;
                location = format!("row {i}");
            }
        }
        (worst, location)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    /// Reduced costs; positive entries improve the objective.
    reduced: Vec<T>,
    value: T,
    cols: usize,
    pivots: usize,
    bland: bool,
    degenerate_run: usize,
    costs: Vec<T>,
    /// Whether the right-hand sides currently carry a perturbation, which
    /// is tracked in column `cols + 1` as `B⁻¹ε`.
    perturbed: bool,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, i: usize) -> &T {
        &self.rows[i][self.cols]
    }

    fn set_costs(&mut self, costs: &[T]) {
        self.costs = costs.to_vec();
        let mut reduced = costs.to_vec();
        let mut value = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b].clone();
            if cb == T::zero() {
                continue;
            }
            for (j, r) in reduced.iter_mut().enumerate() {
                *r = r.clone() - cb.clone() * self.rows[i][j].clone();
            }
            value = value + cb * self.rhs(i).clone();
        }
        self.reduced = reduced.into_iter().map(T::clean).collect();
        self.value = value;
    }

    fn pivot(&mut self, r: usize, s: usize) {
        self.pivot_with(r, s, true);
    }

    /// Pivot that leaves infeasible right-hand sides alone, for dual steps.
    fn pivot_unclamped(&mut self, r: usize, s: usize) {
        self.pivot_with(r, s, false);
    }

    fn pivot_with(&mut self, r: usize, s: usize, clamp: bool) {
        let piv = self.rows[r][s].clone();
        for v in self.rows[r].iter_mut() {
            *v = (v.clone() / piv.clone()).clean();
        }
        self.rows[r][s] = T::one();
        if clamp && self.rows[r][self.cols] < T::zero() {
            // Harris steps may overshoot by at most the slack.
            self.rows[r][self.cols] = T::zero();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[s].clone();
            if f == T::zero() {
                continue;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if *p != T::zero() {
                    *v = (v.clone() - f.clone() * p.clone()).clean();
                }
            }
            row[s] = T::zero();
            let b = &mut row[self.cols];
            if clamp && *b < T::zero() && *b >= -T::harris_slack() {
                *b = T::zero();
            }
        }
        let d = self.reduced[s].clone();
        if d != T::zero() {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                if *p != T::zero() {
                    *v = (v.clone() - d.clone() * p.clone()).clean();
                }
            }
            self.value = self.value.clone() + d * pivot_row[self.cols].clone();
        }
        self.reduced[s] = T::zero();
        self.basis[r] = s;
        self.pivots += 1;
    }

    fn entering(&self, allowed: usize) -> Option<usize> {
        let eps = T::optimality_tolerance();
        if self.bland {
            return (0..allowed).find(|&j| self.reduced[j] > eps);
        }
        let mut best: Option<usize> = None;
        for j in 0..allowed {
            if self.reduced[j] > eps && best.map_or(true, |b| self.reduced[j] > self.reduced[b]) {
                best = Some(j);
            }
        }
        best
    }

    fn leaving(&self, s: usize) -> Option<usize> {
        let tol = T::pivot_tolerance();
        let slack = T::harris_slack();
        let rows: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i][s] > tol).collect();
        let ratio = |i: usize| self.rhs(i).clone() / self.rows[i][s].clone();
        if self.bland || slack == T::zero() {
            // Exact minimum ratio; ties go to the smallest basic index under
            // Bland's rule and to the largest pivot otherwise.
            return rows.into_iter().reduce(|b, i| {
                let (ri, rb) = (ratio(i), ratio(b));
                let tie_wins = if self.bland {
                    self.basis[i] < self.basis[b]
                } else {
                    self.rows[i][s] > self.rows[b][s]
                };
                if ri < rb || (ri == rb && tie_wins) {
                    i
                } else {
                    b
                }
            });
        }
        let theta = rows
            .iter()
            .map(|&i| (self.rhs(i).clone() + slack.clone()) / self.rows[i][s].clone())
            .reduce(|a, b| if b < a { b } else { a })?;
        rows.into_iter()
            .filter(|&i| ratio(i) <= theta)
            .reduce(|b, i| if self.rows[i][s] > self.rows[b][s] { i } else { b })
    }

    fn recompute_value(&mut self) {
        let mut value = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            value = value + self.costs[b].clone() * self.rhs(i).clone();
        }
        self.value = value;
    }

    /// Adds small distinct positive amounts to every right-hand side.
    fn perturb(&mut self) {
        let cols = self.cols;
        for (i, row) in self.rows.iter_mut().enumerate() {
            // Golden-ratio sequence: deterministic and well spread.
            let u = (i as f64 * 0.618_033_988_749_895).fract();
            let e = T::from_f64(1e-7 * (1.0 + u));
            row[cols] = row[cols].clone() + e.clone();
            row[cols + 1] = row[cols + 1].clone() + e;
        }
        self.perturbed = true;
        self.recompute_value();
    }

    /// Removes the perturbation and restores primal feasibility with dual
    /// simplex pivots, which keep the reduced costs optimal.
    fn unperturb(&mut self, allowed: usize, limit: usize) -> Result<(), SimplexError> {
        let cols = self.cols;
        for row in self.rows.iter_mut() {
            row[cols] = (row[cols].clone() - row[cols + 1].clone()).clean();
            row[cols + 1] = T::zero();
        }
        self.perturbed = false;
        self.recompute_value();
        self.dual_repair(allowed, limit)
    }

    /// Dual simplex pivots until every right-hand side is nonnegative.
    fn dual_repair(&mut self, allowed: usize, limit: usize) -> Result<(), SimplexError> {
        let tol = T::pivot_tolerance();
        loop {
            let worst = (0..self.rows.len())
                .filter(|&i| *self.rhs(i) < -T::harris_slack())
                .reduce(|a, b| if self.rhs(b) < self.rhs(a) { b } else { a });
            let Some(r) = worst else {
                return Ok(());
            };
            let s = (0..allowed)
                .filter(|&j| self.rows[r][j] < -tol.clone())
                .map(|j| (j, self.reduced[j].clone() / self.rows[r][j].clone()))
                .reduce(|a, b| if b.1 < a.1 { b } else { a })
                .map(|(j, _)| j);
            // No candidate means the row cannot be repaired; the residual
            // check on the returned point reports it.
            let Some(s) = s else {
                return Ok(());
            };
            self.pivot_unclamped(r, s);
            if self.pivots > limit {
                return Err(SimplexError::IterationLimit(limit));
            }
        }
    }

    /// Optimizes, undoing any perturbation introduced on the way.
    fn solve_phase(&mut self, allowed: usize, limit: usize) -> Result<(), SimplexError> {
        for _ in 0..4 {
            self.optimize(allowed, limit)?;
            if !self.perturbed {
                return Ok(());
            }
            self.unperturb(allowed, limit)?;
            if self.entering(allowed).is_none() {
                return Ok(());
            }
        }
        self.bland = true;
        self.optimize(allowed, limit)?;
        if self.perturbed {
            self.unperturb(allowed, limit)?;
        }
        Ok(())
    }

    /// Runs primal simplex with entering candidates restricted to `..allowed`.
    fn optimize(&mut self, allowed: usize, limit: usize) -> Result<(), SimplexError> {
        loop {
            let Some(s) = self.entering(allowed) else {
                return Ok(());
            };
            let Some(r) = self.leaving(s) else {
                return Err(SimplexError::Unbounded { column: s });
            };
            if *self.rhs(r) <= T::eps() {
                self.degenerate_run += 1;
                if self.degenerate_run >= DEGENERATE_RUN {
                    if T::refactor() && !self.perturbed {
                        self.perturb();
                        self.degenerate_run = 0;
                    } else {
                        self.bland = true;
                    }
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, s);
            if self.pivots > limit {
                return Err(SimplexError::IterationLimit(limit));
            }
        }
    }
}

/// Solves `B·x_B = b` for the basis columns of the original rows by Gaussian
/// elimination with partial pivoting. `None` if the basis is numerically
/// singular, in which case the tableau values are kept.
fn basic_values<T: Scalar>(original: &[Vec<T>], basis: &[usize], cols: usize) -> Option<Vec<T>> {
    let m = basis.len();
    let mut a: Vec<Vec<f64>> = original
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = basis.iter().map(|&j| row[j].to_f64()).collect();
            r.push(row[cols].to_f64());
            r
        })
        .collect();
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        let pivot_row = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == c || row[c] == 0.0 {
                continue;
            }
            let f = row[c] / pivot_row[c];
            for (v, pv) in row.iter_mut().zip(&pivot_row).skip(c) {
                *v -= f * pv;
            }
        }
    }
    Some(
        (0..m)
            .map(|i| {
                let v = a[i][m] / a[i][i];
                T::from_f64(if v.abs() < 1e-13 { 0.0 } else { v })
            })
            .collect(),
    )
}

/// Solves `lp` to optimality and checks the primal residuals.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, SimplexError> {
    let n = lp.num_vars;
    let m = lp.rows.len();
    let mut senses = Vec::with_capacity(m);
    let mut dense: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for row in &lp.rows {
        let mut a = vec![T::zero(); n];
        for (j, c) in &row.coeffs {
            a[*j] = a[*j].clone() + c.clone();
        }
        let (sense, b) = if row.rhs < T::zero() {
            for v in a.iter_mut() {
                *v = -v.clone();
            }
            let flipped = match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            (flipped, -row.rhs.clone())
        } else {
            (row.sense, row.rhs.clone())
        };
        senses.push(sense);
        dense.push(a);
        rhs.push(b);
    }

    let slacks = senses.iter().filter(|s| **s != Sense::Eq).count();
    let artificials = senses.iter().filter(|s| **s != Sense::Le).count();
    let first_art = n + slacks;
    let cols = first_art + artificials;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, first_art);
    for ((mut a, sense), b) in dense.into_iter().zip(&senses).zip(rhs) {
        a.resize(cols + 2, T::zero());
        match sense {
            Sense::Le => {
                a[next_slack] = T::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                a[next_slack] = -T::one();
                next_slack += 1;
                a[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                a[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        a[cols] = b;
        rows.push(a);
    }

    let original = if T::refactor() { rows.clone() } else { Vec::new() };
    let mut tab = Tableau {
        rows,
        basis,
        reduced: Vec::new(),
        value: T::zero(),
        cols,
        pivots: 0,
        bland: false,
        degenerate_run: 0,
        costs: Vec::new(),
        perturbed: false,
    };
    let limit = 50 * (cols + m + 10);

    if artificials > 0 {
        let mut costs = vec![T::zero(); cols];
        for c in costs.iter_mut().skip(first_art) {
            *c = -T::one();
        }
        tab.set_costs(&costs);
        tab.solve_phase(cols, limit)?;
        let feas_tol = T::residual_tolerance();
        if tab.value < -feas_tol {
            return Err(SimplexError::Infeasible {
                phase_one: tab.value.to_f64(),
            });
        }
        // Drive zero-level artificials out of the basis where possible; rows
        // where this fails are redundant and keep their artificial at zero.
        for r in 0..m {
            if tab.basis[r] < first_art {
                continue;
            }
            let eps = T::eps();
            let col = (0..first_art).find(|&j| {
                let a = &tab.rows[r][j];
                *a > eps || *a < -eps.clone()
            });
            if let Some(s) = col {
                tab.pivot(r, s);
            }
        }
        tab.bland = false;
        tab.degenerate_run = 0;
    }

    let mut costs = vec![T::zero(); cols];
    for (j, c) in lp.objective.iter().enumerate() {
        costs[j] = if lp.maximize { c.clone() } else { -c.clone() };
    }
    tab.set_costs(&costs);
    tab.solve_phase(first_art, limit)?;

    if T::refactor() {
        // Tableau drift can hide a slightly infeasible basis; repair it from
        // the recomputed values and refactor again.
        for _ in 0..3 {
            let Some(values) = basic_values(&original, &tab.basis, cols) else {
                break;
            };
            let infeasible = values.iter().any(|v| *v < -T::harris_slack());
            for (i, v) in values.into_iter().enumerate() {
                tab.rows[i][cols] = v;
            }
            if !infeasible {
                break;
            }
            tab.recompute_value();
            tab.dual_repair(first_art, limit)?;
        }
    }
    let mut x = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            let v = tab.rhs(i).clone();
            x[b] = if v < T::zero() && v > -T::residual_tolerance() {
                T::zero()
            } else {
                v
            };
        }
    }
    let (worst, location) = lp.max_violation(&x);
    if worst > T::residual_tolerance() {
        return Err(SimplexError::NumericalFailure {
            max_residual: worst.to_f64(),
            location,
        });
    }
    let objective = lp
        .objective
        .iter()
        .zip(&x)
        .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
    Ok(LpSolution {
        x,
        objective,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(2, vec![3.0, 5.0], true);
        lp.push(vec![(0, 1.0)], Sense::Le, 4.0);
        lp.push(vec![(1, 2.0)], Sense::Le, 12.0);
        lp.push(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn exact_rational_optimum() {
        // max x + y, x + 3y ≤ 1, 3x + y ≤ 1 → x = y = 1/4
        let mut lp = LinearProgram::new(2, vec![rat(1, 1), rat(1, 1)], true);
        lp.push(vec![(0, rat(1, 1)), (1, rat(3, 1))], Sense::Le, rat(1, 1));
        lp.push(vec![(0, rat(3, 1)), (1, rat(1, 1))], Sense::Le, rat(1, 1));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, rat(1, 2));
        assert_eq!(sol.x, vec![rat(1, 4), rat(1, 4)]);
    }

    #[test]
    fn minimization_with_ge_and_eq_rows() {
        // min 2x + 3y, x + y ≥ 4, x − y = 1 → x = 2.5, y = 1.5
        let mut lp = LinearProgram::new(2, vec![2.0, 3.0], false);
        lp.push(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 4.0);
        lp.push(vec![(0, 1.0), (1, -1.0)], Sense::Eq, 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 9.5).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // −x ≤ −2 means x ≥ 2; min x → 2
        let mut lp = LinearProgram::new(1, vec![1.0], false);
        lp.push(vec![(0, -1.0)], Sense::Le, -2.0);
        assert!((solve(&lp).unwrap().objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut lp = LinearProgram::new(1, vec![1.0], true);
        lp.push(vec![(0, 1.0)], Sense::Le, 1.0);
        lp.push(vec![(0, 1.0)], Sense::Ge, 2.0);
        assert!(matches!(solve(&lp), Err(SimplexError::Infeasible { .. })));

        let mut lp = LinearProgram::new(2, vec![1.0, 0.0], true);
        lp.push(vec![(1, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&lp).unwrap_err(), SimplexError::Unbounded { column: 0 });
    }

    #[test]
    fn redundant_equalities_survive_phase_one() {
        let mut lp = LinearProgram::new(2, vec![1.0, 1.0], true);
        lp.push(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        lp.push(vec![(0, 2.0), (1, 2.0)], Sense::Eq, 2.0);
        assert!((solve(&lp).unwrap().objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under naive Dantzig pivoting.
        let mut lp = LinearProgram::new(4, vec![0.75, -150.0, 0.02, -6.0], true);
        lp.push(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0);
        lp.push(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0);
        lp.push(vec![(2, 1.0)], Sense::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-9, "{sol:?}");
    }
}
