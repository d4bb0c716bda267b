//! Dense two-phase simplex, generic over the number field. Pricing is
//! Dantzig's rule, switching to Bland's rule during runs of degenerate pivots.
//!
//! `f64` is the working mode; [`BigRational`] gives exact answers for small
//! instances where float tolerance would be disputed.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Pivot and optimality tolerance.
    fn tol() -> Self;
    /// Tolerance for declaring phase one infeasible.
    fn feas_tol() -> Self;
    /// Snaps round-off noise to zero.
    fn clean(self) -> Self {
        self
    }
    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tol() -> Self {
        1e-9
    }
    fn feas_tol() -> Self {
        1e-7
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
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite value")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn tol() -> Self {
        Zero::zero()
    }
    fn feas_tol() -> Self {
        Zero::zero()
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// `opt c·x` subject to the constraints, `0 ≤ x ≤ upper`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub upper: Vec<Option<T>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per constraint, signed for the problem's own sense.
    pub duals: Vec<T>,
    /// Multipliers of the `x_j ≤ u_j` rows; zero for unbounded variables.
    pub upper_duals: Vec<T>,
}

const MAX_PIVOTS: usize = 200_000;
/// Consecutive degenerate pivots before Bland's rule takes over.
const DEGENERATE_RUN: usize = 50;

impl<T: Scalar> LinearProgram<T> {
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), upper: vec![None; n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: T, upper: Option<T>) -> usize {
        self.objective.push(cost);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_upper(&mut self, var: usize, bound: T) {
        self.upper[var] = Some(bound);
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        Tableau::build(self).run(self)
    }

    pub fn value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }
}

impl<T: Scalar> LpSolution<T> {
    /// Substitution check of primal feasibility, dual feasibility,
    /// complementary slackness and the duality gap, in `T` arithmetic (so
    /// exact for rationals at `tol = 0`).
    pub fn verify(&self, lp: &LinearProgram<T>, tol: f64) -> Result<(), String> {
        let n = lp.num_vars();
        let tol = T::from_f64(tol);
        let zero = T::zero();
        let f = |v: &T| v.to_f64();
        let sign = if lp.sense == Sense::Minimize { T::one() } else { -T::one() };
        for (j, v) in self.x.iter().enumerate() {
            if *v < -tol.clone() {
                return Err(format!("x[{j}] = {} is negative", f(v)));
            }
            if let Some(u) = &lp.upper[j] {
                if *v > u.clone() + tol.clone() {
                    return Err(format!("x[{j}] = {} exceeds its bound {}", f(v), f(u)));
                }
            }
        }
        // Reduced costs in minimisation form.
        let mut reduced: Vec<T> = lp.objective.iter().map(|c| sign.clone() * c.clone()).collect();
        for (k, row) in lp.constraints.iter().enumerate() {
            let lhs = row.coeffs.iter().fold(zero.clone(), |acc, (j, a)| acc + a.clone() * self.x[*j].clone());
            let slack = row.rhs.clone() - lhs;
            let ok = match row.relation {
                Relation::Le => slack >= -tol.clone(),
                Relation::Ge => slack <= tol,
                Relation::Eq => slack.abs() <= tol,
            };
            if !ok {
                return Err(format!("constraint {k} violated by {}", f(&slack)));
            }
            let y = sign.clone() * self.duals[k].clone();
            let sign_ok = match row.relation {
                Relation::Le => y <= tol,
                Relation::Ge => y >= -tol.clone(),
                Relation::Eq => true,
            };
            if !sign_ok {
                return Err(format!("dual {k} = {} has the wrong sign", f(&y)));
            }
            if slack.abs() > tol && y.abs() > tol {
                return Err(format!("complementary slackness fails on constraint {k}"));
            }
            for (j, a) in &row.coeffs {
                reduced[*j] = reduced[*j].clone() - y.clone() * a.clone();
            }
        }
        for j in 0..n {
            let w = sign.clone() * self.upper_duals[j].clone();
            if w > tol {
                return Err(format!("upper-bound dual {j} = {} is positive", f(&w)));
            }
            if let Some(u) = &lp.upper[j] {
                if (u.clone() - self.x[j].clone()).abs() > tol && w.abs() > tol {
                    return Err(format!("complementary slackness fails on bound {j}"));
                }
            }
            reduced[j] = reduced[j].clone() - w;
            if reduced[j] < -tol.clone() {
                return Err(format!("reduced cost of x[{j}] is {}", f(&reduced[j])));
            }
            if self.x[j] > tol && reduced[j].abs() > tol {
                return Err(format!("complementary slackness fails on x[{j}]"));
            }
        }
        let mut dual_obj = lp.constraints.iter().zip(&self.duals).fold(zero, |acc, (r, y)| acc + r.rhs.clone() * y.clone());
        for j in 0..n {
            if let Some(u) = &lp.upper[j] {
                dual_obj = dual_obj + u.clone() * self.upper_duals[j].clone();
            }
        }
        let scale = T::one() + self.objective.abs();
        if (dual_obj.clone() - self.objective.clone()).abs() > tol * scale {
            return Err(format!("duality gap {} vs {}", f(&self.objective), f(&dual_obj)));
        }
        Ok(())
    }
}

struct Tableau<T> {
    /// Rows of `[coefficients | rhs]`.
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    /// Row sign flips applied to make the right-hand side non-negative.
    flips: Vec<bool>,
    n_orig: usize,
    first_art: usize,
    n_cols: usize,
    /// Constraint rows come first, then one row per finite upper bound.
    bound_rows: Vec<(usize, usize)>,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars();
        let mut dense: Vec<(Vec<T>, Relation, T)> = Vec::new();
        for c in &lp.constraints {
            let mut row = vec![T::zero(); n];
            for (j, a) in &c.coeffs {
                row[*j] = row[*j].clone() + a.clone();
            }
            dense.push((row, c.relation, c.rhs.clone()));
        }
        let mut bound_rows = Vec::new();
        for (j, u) in lp.upper.iter().enumerate() {
            if let Some(u) = u {
                let mut row = vec![T::zero(); n];
                row[j] = T::one();
                bound_rows.push((dense.len(), j));
                dense.push((row, Relation::Le, u.clone()));
            }
        }
        let m = dense.len();
        let n_slack = dense.iter().filter(|r| r.1 != Relation::Eq).count();
        let first_art = n + n_slack;
        let n_cols = first_art + m;
        let mut rows = Vec::with_capacity(m);
        let mut flips = Vec::with_capacity(m);
        let mut slack = n;
        for (r, (coef, rel, rhs)) in dense.into_iter().enumerate() {
            let mut row = vec![T::zero(); n_cols + 1];
            for (j, a) in coef.into_iter().enumerate() {
                row[j] = a;
            }
            match rel {
                Relation::Le => {
                    row[slack] = T::one();
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -T::one();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            let flip = rhs < T::zero();
            row[n_cols] = rhs;
            if flip {
                for v in row.iter_mut() {
                    *v = -v.clone();
                }
            }
            row[first_art + r] = T::one();
            rows.push(row);
            flips.push(flip);
        }
        // Phase one objective: sum of artificials, priced out.
        let mut obj = vec![T::zero(); n_cols + 1];
        for row in &rows {
            for j in 0..first_art {
                obj[j] = obj[j].clone() - row[j].clone();
            }
            obj[n_cols] = obj[n_cols].clone() - row[n_cols].clone();
        }
        Tableau { rows, obj, basis: (first_art..first_art + m).collect(), flips, n_orig: n, first_art, n_cols, bound_rows }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let piv = self.rows[p][q].clone();
        for v in self.rows[p].iter_mut() {
            *v = (v.clone() / piv.clone()).clean();
        }
        self.rows[p][q] = T::one();
        let prow = self.rows[p].clone();
        let nz: Vec<usize> = (0..=self.n_cols).filter(|&k| prow[k] != T::zero()).collect();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == p || row[q] == T::zero() {
                continue;
            }
            let factor = row[q].clone();
            for &k in &nz {
                row[k] = (row[k].clone() - factor.clone() * prow[k].clone()).clean();
            }
            row[q] = T::zero();
        }
        let factor = self.obj[q].clone();
        if factor != T::zero() {
            for &k in &nz {
                self.obj[k] = (self.obj[k].clone() - factor.clone() * prow[k].clone()).clean();
            }
            self.obj[q] = T::zero();
        }
        self.basis[p] = q;
    }

    /// Iterates until optimal; `limit` bounds entering columns.
    fn iterate(&mut self, limit: usize, pivots: &mut usize) -> Result<(), LpError> {
        let tol = T::tol();
        let neg_tol = -tol.clone();
        let mut degenerate = 0;
        loop {
            let entering = if degenerate >= DEGENERATE_RUN {
                (0..limit).find(|&j| self.obj[j] < neg_tol)
            } else {
                let mut q = None;
                for j in 0..limit {
                    if self.obj[j] < neg_tol && q.map_or(true, |b: usize| self.obj[j] < self.obj[b]) {
                        q = Some(j);
                    }
                }
                q
            };
            let Some(q) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, T)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[q] > tol {
                    let ratio = row[self.n_cols].clone() / row[q].clone();
                    let better = match &best {
                        None => true,
                        Some((br, bv)) => {
                            let d = ratio.clone() - bv.clone();
                            d < neg_tol || (d.abs() <= tol && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            let Some((p, ratio)) = best else {
                return Err(LpError::Unbounded);
            };
            if ratio.abs() <= tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(p, q);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
        let mut pivots = 0;
        self.iterate(self.first_art, &mut pivots)?;
        if -self.obj[self.n_cols].clone() > T::feas_tol() {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..self.rows.len() {
            if self.basis[r] >= self.first_art {
                if let Some(q) = (0..self.first_art).find(|&j| self.rows[r][j].abs() > T::tol()) {
                    self.pivot(r, q);
                }
            }
        }
        // Phase two pricing.
        let min = lp.sense == Sense::Minimize;
        let mut cost = vec![T::zero(); self.n_cols];
        for j in 0..self.n_orig {
            cost[j] = if min { lp.objective[j].clone() } else { -lp.objective[j].clone() };
        }
        let mut obj = vec![T::zero(); self.n_cols + 1];
        obj[..self.n_cols].clone_from_slice(&cost);
        for (r, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[r]].clone();
            if cb != T::zero() {
                for k in 0..=self.n_cols {
                    obj[k] = (obj[k].clone() - cb.clone() * row[k].clone()).clean();
                }
            }
        }
        self.obj = obj;
        self.iterate(self.first_art, &mut pivots)?;

        let mut x = vec![T::zero(); self.n_orig];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rows[r][self.n_cols].clone();
            }
        }
        let n_rows = self.rows.len();
        let mut y = Vec::with_capacity(n_rows);
        for r in 0..n_rows {
            let pi = -self.obj[self.first_art + r].clone();
            let pi = if self.flips[r] { -pi } else { pi };
            y.push(if min { pi } else { -pi });
        }
        let n_cons = lp.constraints.len();
        let mut upper_duals = vec![T::zero(); self.n_orig];
        for &(r, j) in &self.bound_rows {
            upper_duals[j] = y[r].clone();
        }
        y.truncate(n_cons);
        let objective = lp.value(&x);
        Ok(LpSolution { x, objective, duals: y, upper_duals })
    }
}
