//! The concrete oracle family used by the benchmark: quadratic regression
//! losses `f(x) = 1/2 ||H x - z||^2 (+ ridge/2 ||x||^2)` and affine
//! constraints `g(x) = A x - a`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CoreError, Result};
use crate::problem::{norm2, ConstraintFunction, DecisionSet, LossFunction};
use crate::scalar::Real;

/// Least-squares loss with an optional ridge term that makes it strongly
/// convex with modulus equal to `ridge`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss<T> {
    h: Array2<T>,
    z: Array1<T>,
    ridge: T,
}

impl<T: Real> QuadraticLoss<T> {
    pub fn new(h: Array2<T>, z: Array1<T>) -> Result<Self> {
        Self::with_ridge(h, z, T::zero())
    }

    pub fn with_ridge(h: Array2<T>, z: Array1<T>, ridge: T) -> Result<Self> {
        if h.nrows() != z.len() {
            return Err(CoreError::dim("quadratic loss rows", h.nrows(), z.len()));
        }
        if ridge < T::zero() {
            return Err(CoreError::arg("ridge", "must be nonnegative"));
        }
        Ok(Self { h, z, ridge })
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.h
    }

    pub fn target(&self) -> &Array1<T> {
        &self.z
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    /// Upper bound on `f` over the set via per-row interval arithmetic;
    /// since `f >= 0`, this also bounds the variation `|f(x) - f(y)|`.
    pub fn value_range_bound(&self, set: &DecisionSet<T>) -> T {
        let (lo, hi) = set.coordinate_intervals();
        let half = T::of(0.5);
        let mut bound = T::zero();
        for (row, &zk) in self.h.rows().into_iter().zip(self.z.iter()) {
            let (rlo, rhi) = row_interval(&row, &lo.view(), &hi.view());
            let (ilo, ihi) = (rlo - zk, rhi - zk);
            bound = bound + half * T::max(ilo * ilo, ihi * ihi);
        }
        if self.ridge > T::zero() {
            let sq = lo
                .iter()
                .zip(hi.iter())
                .fold(T::zero(), |acc, (&l, &u)| acc + T::max(l * l, u * u));
            bound = bound + half * self.ridge * sq;
        }
        bound
    }

    /// Operator-norm bound on the gradient over the set:
    /// `||H^T|| (||H|| R + ||z||) + ridge R` with Frobenius norms.
    pub fn gradient_norm_bound(&self, set: &DecisionSet<T>) -> T {
        let r = set.outer_radius();
        let hf = frobenius(&self.h);
        hf * (hf * r + norm2(&self.z.view())) + self.ridge * r
    }
}

impl<T: Real> LossFunction<T> for QuadraticLoss<T> {
    fn value(&self, x: &ArrayView1<T>) -> T {
        let residual = self.h.dot(x) - &self.z;
        let half = T::of(0.5);
        let mut v = half * residual.dot(&residual);
        if self.ridge > T::zero() {
            v = v + half * self.ridge * x.dot(x);
        }
        v
    }

    fn subgradient(&self, x: &ArrayView1<T>) -> Array1<T> {
        let residual = self.h.dot(x) - &self.z;
        let mut g = self.h.t().dot(&residual);
        if self.ridge > T::zero() {
            g = g + &(x.to_owned() * self.ridge);
        }
        g
    }
}

/// Affine constraint block `g(x) = A x - a` with `A: m x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint<T> {
    a_mat: Array2<T>,
    offset: Array1<T>,
}

impl<T: Real> AffineConstraint<T> {
    pub fn new(a_mat: Array2<T>, offset: Array1<T>) -> Result<Self> {
        if a_mat.nrows() != offset.len() {
            return Err(CoreError::dim(
                "affine constraint rows",
                a_mat.nrows(),
                offset.len(),
            ));
        }
        Ok(Self { a_mat, offset })
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.a_mat
    }

    pub fn offset(&self) -> &Array1<T> {
        &self.offset
    }

    /// Interval bound on `||g||` over the set.
    pub fn value_norm_bound(&self, set: &DecisionSet<T>) -> T {
        let (lo, hi) = set.coordinate_intervals();
        let mut sq = T::zero();
        for (row, &aj) in self.a_mat.rows().into_iter().zip(self.offset.iter()) {
            let (rlo, rhi) = row_interval(&row, &lo.view(), &hi.view());
            let mag = T::max((rlo - aj).abs(), (rhi - aj).abs());
            sq = sq + mag * mag;
        }
        sq.sqrt()
    }

    /// Frobenius bound on the Jacobian norm.
    pub fn jacobian_norm_bound(&self) -> T {
        frobenius(&self.a_mat)
    }
}

impl<T: Real> ConstraintFunction<T> for AffineConstraint<T> {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn value(&self, x: &ArrayView1<T>) -> Array1<T> {
        self.a_mat.dot(x) - &self.offset
    }

    fn jacobian(&self, _x: &ArrayView1<T>) -> Array2<T> {
        self.a_mat.t().to_owned()
    }
}

/// Range of a linear form `row . x` over the coordinate intervals.
fn row_interval<T: Real>(
    row: &ArrayView1<T>,
    lo: &ArrayView1<T>,
    hi: &ArrayView1<T>,
) -> (T, T) {
    let mut min = T::zero();
    let mut max = T::zero();
    for ((&c, &l), &u) in row.iter().zip(lo.iter()).zip(hi.iter()) {
        if c >= T::zero() {
            min = min + c * l;
            max = max + c * u;
        } else {
            min = min + c * u;
            max = max + c * l;
        }
    }
    (min, max)
}

fn frobenius<T: Real>(m: &Array2<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}
