//! Step-size schedules.
//!
//! All four kinds share `beta_t = t^-kappa` and `gamma_t = t^-(kappa-1)`,
//! so `gamma_t beta_t = 1/t <= 1`. Convex kinds scale the primal step by
//! `alpha_0 / t^kappa`; strongly convex kinds use `1 / t^c` with
//! `c in [max(kappa, 1-kappa), 1)`. Bandit kinds add the shrinkage
//! `xi_t = 1/(t+1)` and exploration radius `delta_t = r(X)/(t+1)`.

use crate::error::{CoreError, Result};
use crate::scalar::Real;

/// Which theorem's schedule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    ConvexFull,
    StronglyConvexFull,
    ConvexBandit,
    StronglyConvexBandit,
}

impl ScheduleKind {
    pub fn is_bandit(self) -> bool {
        matches!(self, ScheduleKind::ConvexBandit | ScheduleKind::StronglyConvexBandit)
    }

    pub fn is_strongly_convex(self) -> bool {
        matches!(
            self,
            ScheduleKind::StronglyConvexFull | ScheduleKind::StronglyConvexBandit
        )
    }
}

/// The step sequences of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    kind: ScheduleKind,
    alpha0: T,
    kappa: T,
    c: T,
    inner_radius: T,
}

/// Schedule values at one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValues<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// Shrinkage coefficient; bandit kinds only.
    pub xi: Option<T>,
    /// Exploration radius; bandit kinds only.
    pub delta: Option<T>,
}

impl<T: Real> StepSchedule<T> {
    pub fn convex_full(alpha0: T, kappa: T) -> Result<Self> {
        Self::build(ScheduleKind::ConvexFull, alpha0, kappa, T::one(), T::zero())
    }

    pub fn strongly_convex_full(kappa: T, c: T) -> Result<Self> {
        Self::build(ScheduleKind::StronglyConvexFull, T::one(), kappa, c, T::zero())
    }

    pub fn convex_bandit(alpha0: T, kappa: T, inner_radius: T) -> Result<Self> {
        Self::build(ScheduleKind::ConvexBandit, alpha0, kappa, T::one(), inner_radius)
    }

    pub fn strongly_convex_bandit(kappa: T, c: T, inner_radius: T) -> Result<Self> {
        Self::build(ScheduleKind::StronglyConvexBandit, T::one(), kappa, c, inner_radius)
    }

    fn build(kind: ScheduleKind, alpha0: T, kappa: T, c: T, inner_radius: T) -> Result<Self> {
        if !(kappa > T::zero() && kappa < T::one()) {
            return Err(CoreError::arg("kappa", "must lie in (0, 1)"));
        }
        if !kind.is_strongly_convex() && alpha0 <= T::zero() {
            return Err(CoreError::arg("alpha0", "must be positive"));
        }
        if kind.is_strongly_convex() {
            let floor = kappa.max(T::one() - kappa);
            if !(c >= floor && c < T::one()) {
                return Err(CoreError::arg(
                    "c",
                    format!("must lie in [max(kappa, 1-kappa), 1) = [{floor}, 1)"),
                ));
            }
        }
        if kind.is_bandit() && inner_radius <= T::zero() {
            return Err(CoreError::arg(
                "inner_radius",
                "bandit schedules need a positive inner radius",
            ));
        }
        Ok(Self {
            kind,
            alpha0,
            kappa,
            c,
            inner_radius,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Schedule values at round `t >= 1`.
    pub fn at(&self, t: usize) -> Result<StepValues<T>> {
        if t == 0 {
            return Err(CoreError::arg("t", "rounds are 1-based"));
        }
        let tf = T::of_usize(t);
        let alpha = if self.kind.is_strongly_convex() {
            tf.powf(-self.c)
        } else {
            self.alpha0 * tf.powf(-self.kappa)
        };
        let beta = tf.powf(-self.kappa);
        let gamma = tf.powf(self.kappa - T::one());
        let (xi, delta) = if self.kind.is_bandit() {
            let next = T::of_usize(t + 1);
            (Some(T::one() / next), Some(self.inner_radius / next))
        } else {
            (None, None)
        };
        Ok(StepValues {
            alpha,
            beta,
            gamma,
            xi,
            delta,
        })
    }
}
