//! Dense two-phase primal simplex, generic over the number type.
//!
//! `f64` is the default field; [`BigRational`] gives exact answers for small
//! programs. Pivoting is deterministic: Dantzig's rule with lowest-index ties,
//! switching to Bland's rule while the objective stalls on degenerate pivots.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};

const F64_ZERO: f64 = 1e-12;
const F64_PIVOT: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

pub trait Field: Clone + Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// Strictly positive beyond the pivot tolerance.
    fn is_pos(&self) -> bool;
    /// Strictly negative beyond the pivot tolerance.
    fn is_neg(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn less(&self, other: &Self) -> bool;
    /// `self -= factor * value`, snapping round-off to zero.
    fn sub_mul(&mut self, factor: &Self, value: &Self);
}

impl Field for f64 {
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
    fn is_zero(&self) -> bool {
        f64::abs(*self) <= F64_ZERO
    }
    fn is_pos(&self) -> bool {
        *self > F64_PIVOT
    }
    fn is_neg(&self) -> bool {
        *self < -F64_PIVOT
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn less(&self, other: &Self) -> bool {
        self < other
    }
    fn sub_mul(&mut self, factor: &Self, value: &Self) {
        *self -= factor * value;
        if f64::abs(*self) <= F64_ZERO {
            *self = 0.0;
        }
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_f64(v: f64) -> Self {
        <BigRational as num_traits::FromPrimitive>::from_f64(v)
            .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        num_traits::Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        num_traits::Signed::is_negative(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        num_traits::Signed::abs(self)
    }
    fn less(&self, other: &Self) -> bool {
        self < other
    }
    fn sub_mul(&mut self, factor: &Self, value: &Self) {
        *self -= factor * value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c·x` subject to linear rows and `x ≥ 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub exact: bool,
}

impl LinearProgram {
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.var_names.push(name.into());
        self.objective.push(cost);
        self.var_names.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest constraint violation of `x` (including `x ≥ 0`).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_in::<f64>()
    }

    pub fn solve_exact(&self) -> Result<LpSolution> {
        self.solve_in::<BigRational>()
    }

    pub fn solve_in<S: Field>(&self) -> Result<LpSolution> {
        let mut t = Tableau::<S>::build(self);
        let limit = 50 * (t.rows.len() + t.ncols) + 1000;
        let mut iterations = 0;
        if t.has_artificials() {
            t.set_phase_one_costs();
            iterations += t.run(limit)?;
            if t.objective_rhs.neg().is_pos() {
                return Err(Error::Infeasible);
            }
            t.drive_out_artificials();
        }
        t.set_phase_two_costs(&self.objective);
        iterations += t.run(limit.saturating_sub(iterations))?;
        let mut values = vec![0.0; self.num_vars()];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < self.num_vars() {
                values[b] = t.rows[i][t.ncols].to_f64().max(0.0);
            }
        }
        Ok(LpSolution {
            objective: self.objective_value(&values),
            values,
            iterations,
            exact: std::any::type_name::<S>() != std::any::type_name::<f64>(),
        })
    }
}

struct Tableau<S> {
    // each row has ncols coefficients followed by the right-hand side
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
    costs: Vec<S>,
    objective_rhs: S,
    ncols: usize,
    first_artificial: usize,
    allowed: Vec<bool>,
}

impl<S: Field> Tableau<S> {
    fn build(lp: &LinearProgram) -> Self {
        let nv = lp.num_vars();
        let mut slack_count = 0;
        let mut art_count = 0;
        for r in &lp.rows {
            let flipped = flip_sense(r);
            if flipped != Sense::Eq {
                slack_count += 1;
            }
            if flipped != Sense::Le {
                art_count += 1;
            }
        }
        let first_artificial = nv + slack_count;
        let ncols = first_artificial + art_count;
        let mut rows = Vec::with_capacity(lp.rows.len());
        let mut basis = Vec::with_capacity(lp.rows.len());
        let (mut next_slack, mut next_art) = (nv, first_artificial);
        for r in &lp.rows {
            let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![S::zero(); ncols + 1];
            for &(j, a) in &r.coeffs {
                row[j] = row[j].add(&S::from_f64(sign * a));
            }
            row[ncols] = S::from_f64(sign * r.rhs);
            match flip_sense(r) {
                Sense::Le => {
                    row[next_slack] = S::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = S::one().neg();
                    next_slack += 1;
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            costs: vec![S::zero(); ncols],
            objective_rhs: S::zero(),
            ncols,
            first_artificial,
            allowed: vec![true; ncols],
        }
    }

    fn has_artificials(&self) -> bool {
        self.first_artificial < self.ncols
    }

    fn set_phase_one_costs(&mut self) {
        let mut costs = vec![S::zero(); self.ncols];
        let mut rhs = S::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            if b >= self.first_artificial {
                let row = &self.rows[i];
                for j in 0..self.first_artificial {
                    if !row[j].is_zero() {
                        costs[j] = costs[j].add(&row[j].neg());
                    }
                }
                rhs = rhs.add(&row[self.ncols].neg());
            }
        }
        self.costs = costs;
        self.objective_rhs = rhs;
    }

    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                let best = (0..self.first_artificial)
                    .filter(|&j| !self.rows[i][j].is_zero())
                    .fold(None::<usize>, |acc, j| match acc {
                        Some(a) if !self.rows[i][a].abs().less(&self.rows[i][j].abs()) => Some(a),
                        _ => Some(j),
                    });
                match best {
                    Some(j) => self.pivot(i, j),
                    None => {
                        // redundant row
                        self.rows.swap_remove(i);
                        self.basis.swap_remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in self.first_artificial..self.ncols {
            self.allowed[j] = false;
        }
    }

    fn set_phase_two_costs(&mut self, objective: &[f64]) {
        let mut costs: Vec<S> = (0..self.ncols)
            .map(|j| objective.get(j).map_or_else(S::zero, |&c| S::from_f64(c)))
            .collect();
        let mut rhs = S::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b].clone();
            if cb.is_zero() {
                continue;
            }
            let row = &self.rows[i];
            for (j, c) in costs.iter_mut().enumerate() {
                if !row[j].is_zero() {
                    c.sub_mul(&cb, &row[j]);
                }
            }
            rhs.sub_mul(&cb, &row[self.ncols]);
        }
        for &b in &self.basis {
            costs[b] = S::zero();
        }
        self.costs = costs;
        self.objective_rhs = rhs;
    }

    /// Pivots until optimal. Returns the number of pivots.
    fn run(&mut self, limit: usize) -> Result<usize> {
        let mut streak = 0;
        for it in 0..=limit {
            let bland = streak >= DEGENERATE_STREAK;
            let Some(enter) = self.entering(bland) else {
                return Ok(it);
            };
            let Some(leave) = self.leaving(enter, bland) else {
                return Err(Error::Unbounded);
            };
            if self.rows[leave][self.ncols].is_zero() {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(leave, enter);
        }
        Err(Error::IterationLimit(limit))
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..self.ncols {
            if !self.allowed[j] || !self.costs[j].is_neg() {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some(b) if !self.costs[j].less(&self.costs[b]) => {}
                _ => best = Some(j),
            }
        }
        best
    }

    fn leaving(&self, enter: usize, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, S)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = &row[enter];
            if !a.is_pos() {
                continue;
            }
            let ratio = row[self.ncols].div(a);
            let better = match &best {
                None => true,
                Some((b, r)) => {
                    if ratio.less(r) {
                        // strictly smaller beyond round-off
                        !ratio.add(&r.neg()).is_zero() || self.tie_break(i, *b, enter, bland)
                    } else if r.less(&ratio) && !ratio.add(&r.neg()).is_zero() {
                        false
                    } else {
                        self.tie_break(i, *b, enter, bland)
                    }
                }
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    fn tie_break(&self, cand: usize, incumbent: usize, enter: usize, bland: bool) -> bool {
        if bland {
            return self.basis[cand] < self.basis[incumbent];
        }
        let (a, b) = (self.rows[cand][enter].abs(), self.rows[incumbent][enter].abs());
        if b.less(&a) {
            true
        } else if a.less(&b) {
            false
        } else {
            self.basis[cand] < self.basis[incumbent]
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let mut prow = std::mem::take(&mut self.rows[r]);
        let p = prow[c].clone();
        let nz: Vec<usize> = (0..=self.ncols).filter(|&j| !prow[j].is_zero()).collect();
        for &j in &nz {
            prow[j] = prow[j].div(&p);
        }
        prow[c] = S::one();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row.is_empty() {
                continue;
            }
            let f = row[c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                row[j].sub_mul(&f, &prow[j]);
            }
            row[c] = S::zero();
        }
        let f = self.costs[c].clone();
        if !f.is_zero() {
            for &j in &nz {
                if j == self.ncols {
                    self.objective_rhs.sub_mul(&f, &prow[j]);
                } else {
                    self.costs[j].sub_mul(&f, &prow[j]);
                }
            }
            self.costs[c] = S::zero();
        }
        self.rows[r] = prow;
        self.basis[r] = c;
    }
}

fn flip_sense(r: &Row) -> Sense {
    match (r.sense, r.rhs < 0.0) {
        (Sense::Le, true) => Sense::Ge,
        (Sense::Ge, true) => Sense::Le,
        (s, _) => s,
    }
}
