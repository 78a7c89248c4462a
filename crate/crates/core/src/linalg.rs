//! Exact Gaussian elimination over a field: rank, reduced echelon form,
//! incremental independence, and linear solves. Used over the rationals for
//! evaluation matrices and over rational functions for symbolic inversion.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::expr::RationalExpr;

pub trait Field: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// Multiplicative inverse of a nonzero element.
    fn inv(&self) -> Self;
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inv(&self) -> Self {
        self.recip()
    }
}

impl Field for RationalExpr {
    fn zero() -> Self {
        RationalExpr::zero()
    }
    fn one() -> Self {
        RationalExpr::one()
    }
    fn is_zero(&self) -> bool {
        RationalExpr::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inv(&self) -> Self {
        self.recip().expect("inverse of nonzero expression")
    }
}

pub type Matrix<F> = Vec<Vec<F>>;

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref<F: Field>(m: &mut Matrix<F>) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].inv();
        for x in m[r].iter_mut() {
            *x = x.mul(&inv);
        }
        let pivot = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *x = x.sub(&p.mul(&f));
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(m: &Matrix<F>) -> usize {
    let mut a = m.clone();
    rref(&mut a).len()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution<F> {
    Unique(Vec<F>),
    Inconsistent,
    Underdetermined,
}

/// Solve `sum_j x_j * columns[j] = rhs`, where `columns[j]` are vectors of equal length.
pub fn solve_columns<F: Field>(columns: &[Vec<F>], rhs: &[F]) -> Solution<F> {
    let n = columns.len();
    let rows = rhs.len();
    let mut aug: Matrix<F> = (0..rows)
        .map(|i| {
            let mut row: Vec<F> = columns.iter().map(|c| c[i].clone()).collect();
            row.push(rhs[i].clone());
            row
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.last() == Some(&n) {
        return Solution::Inconsistent;
    }
    if pivots.len() < n {
        return Solution::Underdetermined;
    }
    Solution::Unique((0..n).map(|j| aug[j][n].clone()).collect())
}

/// Incrementally grown echelon basis of a row space; answers "does this
/// vector increase the rank?" and expresses members in terms of the inserted
/// vectors.
#[derive(Debug, Clone)]
pub struct EchelonBasis<F> {
    // reduced rows with pivot column and the combination of inserted vectors they equal
    rows: Vec<(usize, Vec<F>, Vec<F>)>,
    inserted: usize,
}

impl<F: Field> Default for EchelonBasis<F> {
    fn default() -> Self {
        EchelonBasis { rows: Vec::new(), inserted: 0 }
    }
}

impl<F: Field> EchelonBasis<F> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the basis; returns the residual and the combination
    /// of inserted vectors that was subtracted.
    fn reduce(&self, v: &[F]) -> (Vec<F>, Vec<F>) {
        let mut r = v.to_vec();
        let mut combo = vec![F::zero(); self.inserted];
        for (p, row, rc) in &self.rows {
            if r[*p].is_zero() {
                continue;
            }
            let f = r[*p].clone();
            for (x, y) in r.iter_mut().zip(row) {
                if !y.is_zero() {
                    *x = x.sub(&y.mul(&f));
                }
            }
            for (c, y) in combo.iter_mut().zip(rc) {
                if !y.is_zero() {
                    *c = c.add(&y.mul(&f));
                }
            }
        }
        (r, combo)
    }

    pub fn contains(&self, v: &[F]) -> bool {
        self.reduce(v).0.iter().all(Field::is_zero)
    }

    /// Coefficients `c` with `v = sum c_i * inserted_i`, if `v` is in the span.
    pub fn coordinates(&self, v: &[F]) -> Option<Vec<F>> {
        let (r, combo) = self.reduce(v);
        r.iter().all(Field::is_zero).then_some(combo)
    }

    /// Insert `v` if it is independent of the current span. Returns whether it was added.
    pub fn insert(&mut self, v: &[F]) -> bool {
        let (mut r, combo) = self.reduce(v);
        let Some(p) = r.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let idx = self.inserted;
        self.inserted += 1;
        for (_, _, rc) in self.rows.iter_mut() {
            rc.push(F::zero());
        }
        // residual = v - combo·inserted, as a combination of inserted vectors
        let mut rc: Vec<F> = combo.iter().map(|c| F::zero().sub(c)).collect();
        rc.push(F::one());
        debug_assert_eq!(rc.len(), idx + 1);
        let inv = r[p].inv();
        for x in r.iter_mut() {
            *x = x.mul(&inv);
        }
        for x in rc.iter_mut() {
            *x = x.mul(&inv);
        }
        self.rows.push((p, r, rc));
        true
    }
}
