//! Decision sets, loss/constraint oracles, and the benchmark stream.
//!
//! The decision set is a compact convex set `X` that contains the origin;
//! `inner_radius` and `outer_radius` are the radii of the largest origin
//! ball inside `X` and the smallest origin ball containing `X`. Both feed
//! the bandit machinery (exploration radius, dual bounds).

mod quadratic;
mod stream;

pub use quadratic::{AffineConstraint, QuadraticLoss};
pub use stream::{generate_regression_stream, DumpFilter, ProblemInstance, StreamConfig};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CoreError, Result};
use crate::scalar::Real;

/// Geometry of the decision set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind<T> {
    /// Axis-aligned box with per-coordinate bounds.
    Box { lower: Array1<T>, upper: Array1<T> },
    /// Euclidean ball.
    Ball { center: Array1<T>, radius: T },
}

/// Compact convex decision set with cached inner/outer radii.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet<T> {
    kind: SetKind<T>,
    dim: usize,
    inner_radius: T,
    outer_radius: T,
}

impl<T: Real> DecisionSet<T> {
    /// The box `[-a, a]^p`.
    pub fn symmetric_box(half_width: T, dim: usize) -> Result<Self> {
        if half_width <= T::zero() {
            return Err(CoreError::arg("half_width", "must be positive"));
        }
        Self::bounded_box(
            Array1::from_elem(dim, -half_width),
            Array1::from_elem(dim, half_width),
        )
    }

    /// A general axis-aligned box.
    pub fn bounded_box(lower: Array1<T>, upper: Array1<T>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(CoreError::dim("box bounds", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(CoreError::arg("bounds", "lower bound exceeds upper bound"));
        }
        let dim = lower.len();
        // Largest origin-centered ball inside the box; zero if the origin
        // is not interior.
        let inner = lower
            .iter()
            .zip(upper.iter())
            .map(|(&l, &u)| T::min(u, -l))
            .fold(T::infinity(), T::min)
            .max(T::zero());
        let outer = lower
            .iter()
            .zip(upper.iter())
            .map(|(&l, &u)| T::max(l * l, u * u))
            .fold(T::zero(), |acc, v| acc + v)
            .sqrt();
        Ok(Self {
            kind: SetKind::Box { lower, upper },
            dim,
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    /// A Euclidean ball.
    pub fn ball(center: Array1<T>, radius: T) -> Result<Self> {
        if radius < T::zero() {
            return Err(CoreError::arg("radius", "must be nonnegative"));
        }
        let dim = center.len();
        let center_norm = norm2(&center.view());
        let inner = (radius - center_norm).max(T::zero());
        let outer = radius + center_norm;
        Ok(Self {
            kind: SetKind::Ball { center, radius },
            dim,
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    pub fn kind(&self) -> &SetKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius of the largest origin-centered ball contained in the set.
    pub fn inner_radius(&self) -> T {
        self.inner_radius
    }

    /// Radius of the smallest origin-centered ball containing the set.
    pub fn outer_radius(&self) -> T {
        self.outer_radius
    }

    /// Per-coordinate interval hull `[lo_j, hi_j]` (the box itself, or the
    /// bounding box of a ball). Used for interval bounds on oracles.
    pub fn coordinate_intervals(&self) -> (Array1<T>, Array1<T>) {
        match &self.kind {
            SetKind::Box { lower, upper } => (lower.clone(), upper.clone()),
            SetKind::Ball { center, radius } => {
                (center.mapv(|c| c - *radius), center.mapv(|c| c + *radius))
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &ArrayView1<T>) -> Result<Array1<T>> {
        if x.len() != self.dim {
            return Err(CoreError::dim("project", self.dim, x.len()));
        }
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => {
                let mut y = x.to_owned();
                for ((v, &l), &u) in y.iter_mut().zip(lower.iter()).zip(upper.iter()) {
                    *v = (*v).max(l).min(u);
                }
                y
            }
            SetKind::Ball { center, radius } => {
                let offset = x - center;
                let dist = norm2(&offset.view());
                if dist <= *radius {
                    x.to_owned()
                } else {
                    center + &(&offset * (*radius / dist))
                }
            }
        })
    }

    /// Membership test with an absolute slack for float roundoff.
    pub fn contains(&self, x: &ArrayView1<T>, tol: T) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter())
                .zip(upper.iter())
                .all(|((&v, &l), &u)| v >= l - tol && v <= u + tol),
            SetKind::Ball { center, radius } => norm2(&(x - center).view()) <= *radius + tol,
        }
    }

    /// The scaled set `(1 - xi) X` for origin-symmetric sets.
    ///
    /// Only boxes `[-a, a]` and origin-centered balls shrink meaningfully;
    /// anything else is rejected.
    pub fn shrink(&self, xi: T) -> Result<Self> {
        if !(xi > T::zero() && xi < T::one()) {
            return Err(CoreError::arg("xi", "must lie in (0, 1)"));
        }
        let scale = T::one() - xi;
        match &self.kind {
            SetKind::Box { lower, upper } => {
                if lower.iter().zip(upper.iter()).any(|(&l, &u)| l != -u) {
                    return Err(CoreError::UnsupportedSet(
                        "shrink requires an origin-symmetric box".to_string(),
                    ));
                }
                Self::bounded_box(lower * scale, upper * scale)
            }
            SetKind::Ball { center, radius } => {
                if center.iter().any(|&c| c != T::zero()) {
                    return Err(CoreError::UnsupportedSet(
                        "shrink requires an origin-centered ball".to_string(),
                    ));
                }
                Self::ball(center.clone(), *radius * scale)
            }
        }
    }
}

/// Componentwise `max(g, 0)`.
pub fn clipped_value<T: Real>(g: &ArrayView1<T>) -> Array1<T> {
    g.mapv(|v| v.max(T::zero()))
}

/// Subgradient of the clipped constraint `[g]_+` at `x`, as a `p x m`
/// matrix: column `j` is zero where `g_j(x) < 0` and the `j`-th gradient
/// column otherwise (the boundary `g_j(x) = 0` keeps the gradient).
pub fn clipped_subgradient<T: Real>(
    constraint: &impl ConstraintFunction<T>,
    x: &ArrayView1<T>,
) -> Array2<T> {
    let values = constraint.value(x);
    let mut jac = constraint.jacobian(x);
    for (j, &g) in values.iter().enumerate() {
        if g < T::zero() {
            jac.column_mut(j).fill(T::zero());
        }
    }
    jac
}

/// Convex loss oracle: value and one subgradient.
pub trait LossFunction<T> {
    fn value(&self, x: &ArrayView1<T>) -> T;
    fn subgradient(&self, x: &ArrayView1<T>) -> Array1<T>;
}

/// Vector-valued convex constraint oracle: value and a `p x m` subgradient
/// matrix whose column `j` is a subgradient of component `j`.
pub trait ConstraintFunction<T> {
    /// Number of constraint components `m`.
    fn dim(&self) -> usize;
    fn value(&self, x: &ArrayView1<T>) -> Array1<T>;
    fn jacobian(&self, x: &ArrayView1<T>) -> Array2<T>;
}

/// Uniform bounds of the running problem instance.
///
/// `f1` bounds loss variation and constraint norms over the set, `f2`
/// bounds all subgradient norms, `mu` is the strong-convexity modulus
/// (zero when absent). All are sound over-approximations obtained from
/// interval/operator-norm arithmetic, cheap enough to compute for every
/// oracle in the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants<T> {
    pub f1: T,
    pub f2: T,
    pub mu: T,
    pub inner_radius: T,
    pub outer_radius: T,
}

impl<T: Real> ProblemConstants<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f1 >= T::zero()
            && self.f2 >= T::zero()
            && self.mu >= T::zero()
            && self.f1.is_finite()
            && self.f2.is_finite()
            && self.inner_radius <= self.outer_radius;
        if ok {
            Ok(())
        } else {
            Err(CoreError::Numerical(
                "problem constants must be finite and nonnegative".to_string(),
            ))
        }
    }
}

/// Euclidean norm.
pub fn norm2<T: Real>(x: &ArrayView1<T>) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}
