//! One synchronized round of the full-information and two-point-bandit
//! primal-dual updates.
//!
//! Every agent reads the frozen round-`t` snapshot and writes its
//! round-`t+1` state; the consensus mix is the only cross-agent read,
//! funneled through [`PrimalAccess`] so tests can observe exactly which
//! neighbors an agent touches. Step values are indexed the way the
//! updates use them: the primal/dual steps of round `t` come from the
//! schedule at `t + 1`, while the exploration radius `delta_t` and the
//! shrinkage `xi_t` protecting the sample points belong to round `t`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::network::MixingMatrix;
use crate::problem::{
    clipped_subgradient, clipped_value, norm2, ConstraintFunction, DecisionSet, LossFunction,
};
use crate::scalar::Real;
use crate::schedule::StepValues;

/// One agent's primal decision and dual vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T> {
    pub x: Array1<T>,
    pub q: Array1<T>,
}

impl<T: Real> AgentState<T> {
    /// Feasible start: the projection of the origin, with a zero dual.
    pub fn origin(set: &DecisionSet<T>, dual_dim: usize) -> Result<Self> {
        let zero = Array1::zeros(set.dim());
        Ok(Self {
            x: set.project(&zero.view())?,
            q: Array1::zeros(dual_dim),
        })
    }
}

/// Read access to the primal decisions of a round snapshot.
pub trait PrimalAccess<T> {
    fn len(&self) -> usize;
    fn primal(&self, j: usize) -> ArrayView1<'_, T>;
}

impl<T: Real> PrimalAccess<T> for [AgentState<T>] {
    fn len(&self) -> usize {
        <[AgentState<T>]>::len(self)
    }

    fn primal(&self, j: usize) -> ArrayView1<'_, T> {
        self[j].x.view()
    }
}

/// Per-round diagnostics: the projection residuals `x_{i,t+1} - z_{i,t+1}`
/// that drive the disagreement analysis.
#[derive(Debug, Clone)]
pub struct RoundDiagnostics<T> {
    pub consensus_error: Vec<Array1<T>>,
}

fn unit_norm_tol<T: Real>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(16.0))
}

fn membership_tol<T: Real>(set: &DecisionSet<T>) -> T {
    T::of(1e-12).max(T::epsilon() * T::of(64.0) * set.outer_radius().max(T::one()))
}

/// Consensus step: `z_i = sum_j [W]_{ i j } x_j` over positive weights.
fn mix_single<T: Real>(
    i: usize,
    w: &MixingMatrix<T>,
    states: &(impl PrimalAccess<T> + ?Sized),
    dim: usize,
) -> Array1<T> {
    let mut z = Array1::zeros(dim);
    let weights = w.weights();
    for j in 0..w.n() {
        let wij = weights[[i, j]];
        if wij > T::zero() {
            z.scaled_add(wij, &states.primal(j));
        }
    }
    z
}

/// Full-information update for a single agent. `steps` are the schedule
/// values at `t + 1`.
pub fn full_info_agent_update<T: Real>(
    i: usize,
    states: &(impl PrimalAccess<T> + ?Sized),
    own: &AgentState<T>,
    w: &MixingMatrix<T>,
    loss: &impl LossFunction<T>,
    constraint: &impl ConstraintFunction<T>,
    set: &DecisionSet<T>,
    steps: &StepValues<T>,
) -> Result<(AgentState<T>, Array1<T>)> {
    if states.len() != w.n() {
        return Err(CoreError::dim("full_info_agent_update", w.n(), states.len()));
    }
    let x = &own.x;
    let z = mix_single(i, w, states, x.len());

    let grad_loss = loss.subgradient(&x.view());
    let g_val = constraint.value(&x.view());
    let jac_clipped = clipped_subgradient(constraint, &x.view());

    // omega = df + d[g]_+ q
    let omega = &grad_loss + &jac_clipped.dot(&own.q);
    let x_next = set.project(&(&z - &(&omega * steps.alpha)).view())?;

    // b = [g]_+ + (d[g]_+)^T (x+ - x)
    let b = clipped_value(&g_val.view()) + jac_clipped.t().dot(&(&x_next - x));
    let keep = T::one() - steps.beta * steps.gamma;
    let q_next = clipped_value(&(&(&own.q * keep) + &(&b * steps.gamma)).view());

    let consensus_error = &x_next - &z;
    Ok((
        AgentState {
            x: x_next,
            q: q_next,
        },
        consensus_error,
    ))
}

/// One synchronized full-information round for all agents. `steps` are
/// the schedule values at `t + 1`.
pub fn full_info_round<T: Real, L, C>(
    states: &[AgentState<T>],
    w: &MixingMatrix<T>,
    losses: &[L],
    constraints: &[C],
    set: &DecisionSet<T>,
    steps: &StepValues<T>,
) -> Result<(Vec<AgentState<T>>, RoundDiagnostics<T>)>
where
    L: LossFunction<T>,
    C: ConstraintFunction<T>,
{
    if losses.len() != states.len() || constraints.len() != states.len() {
        return Err(CoreError::dim("full_info_round oracles", states.len(), losses.len()));
    }
    let mut next = Vec::with_capacity(states.len());
    let mut consensus_error = Vec::with_capacity(states.len());
    for i in 0..states.len() {
        let (state, eps) = full_info_agent_update(
            i,
            states,
            &states[i],
            w,
            &losses[i],
            &constraints[i],
            set,
            steps,
        )?;
        next.push(state);
        consensus_error.push(eps);
    }
    Ok((next, RoundDiagnostics { consensus_error }))
}

/// Two-point loss-gradient estimate `(p/delta)(f(x + delta u) - f(x)) u`.
///
/// Both query points must lie in the set; `u` must be unit-norm.
pub fn two_point_loss_gradient<T: Real>(
    loss: &impl LossFunction<T>,
    set: &DecisionSet<T>,
    x: &ArrayView1<T>,
    delta: T,
    u: &ArrayView1<T>,
) -> Result<Array1<T>> {
    check_probe(set, x, delta, u)?;
    let p = T::of_usize(x.len());
    let probe = x + &(u * delta);
    let diff = loss.value(&probe.view()) - loss.value(x);
    Ok(u * (p / delta * diff))
}

/// Two-point estimate of the clipped-constraint subgradient, as the
/// `p x m` matrix whose column `j` is
/// `(p/delta)([g_j(x + delta u)]_+ - [g_j(x)]_+) u`.
pub fn two_point_constraint_jacobian<T: Real>(
    constraint: &impl ConstraintFunction<T>,
    set: &DecisionSet<T>,
    x: &ArrayView1<T>,
    delta: T,
    u: &ArrayView1<T>,
) -> Result<Array2<T>> {
    check_probe(set, x, delta, u)?;
    let p = T::of_usize(x.len());
    let probe = x + &(u * delta);
    let clipped_far = clipped_value(&constraint.value(&probe.view()).view());
    let clipped_near = clipped_value(&constraint.value(x).view());
    let scaled = (&clipped_far - &clipped_near) * (p / delta);
    let mut jac = Array2::zeros((x.len(), constraint.dim()));
    for (j, &s) in scaled.iter().enumerate() {
        jac.column_mut(j).assign(&(u * s));
    }
    Ok(jac)
}

fn check_probe<T: Real>(
    set: &DecisionSet<T>,
    x: &ArrayView1<T>,
    delta: T,
    u: &ArrayView1<T>,
) -> Result<()> {
    if u.len() != x.len() {
        return Err(CoreError::dim("direction", x.len(), u.len()));
    }
    if delta <= T::zero() {
        return Err(CoreError::arg("delta", "must be positive"));
    }
    if (norm2(u) - T::one()).abs() > unit_norm_tol::<T>() {
        return Err(CoreError::arg("u", "must be unit-norm"));
    }
    let tol = membership_tol(set);
    if !set.contains(x, tol) {
        return Err(CoreError::arg("x", "base point outside the decision set"));
    }
    let probe = x + &(u * delta);
    if !set.contains(&probe.view(), tol) {
        return Err(CoreError::arg("x + delta u", "sample point outside the decision set"));
    }
    Ok(())
}

/// Bandit update for a single agent. `current` supplies `delta_t` and
/// `xi_t`; `steps` are the schedule values at `t + 1` and supply
/// `xi_{t+1}` for the projection set.
#[allow(clippy::too_many_arguments)]
pub fn bandit_agent_update<T: Real>(
    i: usize,
    states: &(impl PrimalAccess<T> + ?Sized),
    own: &AgentState<T>,
    w: &MixingMatrix<T>,
    loss: &impl LossFunction<T>,
    constraint: &impl ConstraintFunction<T>,
    set: &DecisionSet<T>,
    direction: &ArrayView1<T>,
    current: &StepValues<T>,
    steps: &StepValues<T>,
) -> Result<(AgentState<T>, Array1<T>)> {
    if states.len() != w.n() {
        return Err(CoreError::dim("bandit_agent_update", w.n(), states.len()));
    }
    let delta = current
        .delta
        .ok_or_else(|| CoreError::arg("schedule", "bandit round needs delta_t"))?;
    let xi_now = current
        .xi
        .ok_or_else(|| CoreError::arg("schedule", "bandit round needs xi_t"))?;
    let xi_next = steps
        .xi
        .ok_or_else(|| CoreError::arg("schedule", "bandit round needs xi_{t+1}"))?;

    let x = &own.x;
    let shrunk_now = set.shrink(xi_now)?;
    if !shrunk_now.contains(&x.view(), membership_tol(set)) {
        return Err(CoreError::Numerical(format!(
            "agent {i} state left the shrunk decision set"
        )));
    }

    let z = mix_single(i, w, states, x.len());
    let grad_hat = two_point_loss_gradient(loss, set, &x.view(), delta, direction)?;
    let jac_hat = two_point_constraint_jacobian(constraint, set, &x.view(), delta, direction)?;

    let omega = &grad_hat + &jac_hat.dot(&own.q);
    let shrunk_next = set.shrink(xi_next)?;
    let x_next = shrunk_next.project(&(&z - &(&omega * steps.alpha)).view())?;

    let g_val = constraint.value(&x.view());
    let b = clipped_value(&g_val.view()) + jac_hat.t().dot(&(&x_next - x));
    let keep = T::one() - steps.beta * steps.gamma;
    let q_next = clipped_value(&(&(&own.q * keep) + &(&b * steps.gamma)).view());

    let consensus_error = &x_next - &z;
    Ok((
        AgentState {
            x: x_next,
            q: q_next,
        },
        consensus_error,
    ))
}

/// One synchronized bandit round; `directions[i]` is agent `i`'s unit
/// exploration vector for this round.
#[allow(clippy::too_many_arguments)]
pub fn bandit_round<T: Real, L, C>(
    states: &[AgentState<T>],
    w: &MixingMatrix<T>,
    losses: &[L],
    constraints: &[C],
    set: &DecisionSet<T>,
    directions: &[Array1<T>],
    current: &StepValues<T>,
    steps: &StepValues<T>,
) -> Result<(Vec<AgentState<T>>, RoundDiagnostics<T>)>
where
    L: LossFunction<T>,
    C: ConstraintFunction<T>,
{
    if losses.len() != states.len()
        || constraints.len() != states.len()
        || directions.len() != states.len()
    {
        return Err(CoreError::dim("bandit_round oracles", states.len(), losses.len()));
    }
    let mut next = Vec::with_capacity(states.len());
    let mut consensus_error = Vec::with_capacity(states.len());
    for i in 0..states.len() {
        let (state, eps) = bandit_agent_update(
            i,
            states,
            &states[i],
            w,
            &losses[i],
            &constraints[i],
            set,
            &directions[i].view(),
            current,
            steps,
        )?;
        next.push(state);
        consensus_error.push(eps);
    }
    Ok((next, RoundDiagnostics { consensus_error }))
}

/// Uniform draw from the unit sphere in `R^p` by Gaussian normalization.
pub fn sample_unit_sphere<T: Real>(rng: &mut impl Rng, p: usize) -> Array1<T> {
    assert!(p >= 1, "dimension must be positive");
    loop {
        let raw: Array1<T> =
            Array1::from_shape_fn(p, |_| T::of(rng.sample::<f64, _>(StandardNormal)));
        let norm = norm2(&raw.view());
        if norm > T::of(1e-12) {
            return raw / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{AffineConstraint, QuadraticLoss};
    use crate::rng::{stream_rng, StreamPurpose};
    use ndarray::array;
    use std::cell::RefCell;

    /// Affine loss for hand cases: f(x) = <c, x> + b.
    struct AffineLoss {
        c: Array1<f64>,
        b: f64,
    }

    impl LossFunction<f64> for AffineLoss {
        fn value(&self, x: &ArrayView1<f64>) -> f64 {
            self.c.dot(x) + self.b
        }
        fn subgradient(&self, _x: &ArrayView1<f64>) -> Array1<f64> {
            self.c.clone()
        }
    }

    fn interval(half: f64) -> DecisionSet<f64> {
        DecisionSet::symmetric_box(half, 1).unwrap()
    }

    fn unit_steps() -> StepValues<f64> {
        StepValues {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            xi: None,
            delta: None,
        }
    }

    #[test]
    fn full_info_hand_example() {
        // f(x) = x, g(x) = x - 1 at x = 0, q = 0, unit steps:
        // omega = 1, x+ = P[-5,5](-1) = -1, q+ = 0.
        let set = interval(5.0);
        let states = vec![AgentState {
            x: array![0.0],
            q: array![0.0],
        }];
        let w = MixingMatrix::singleton();
        let loss = AffineLoss {
            c: array![1.0],
            b: 0.0,
        };
        let cons = AffineConstraint::new(array![[1.0]], array![1.0]).unwrap();
        let (next, diag) =
            full_info_round(&states, &w, &[loss], &[cons], &set, &unit_steps()).unwrap();
        assert_eq!(next[0].x, array![-1.0]);
        assert_eq!(next[0].q, array![0.0]);
        assert_eq!(diag.consensus_error[0], array![-1.0]);
    }

    #[test]
    fn inactive_constraint_reduces_to_projected_gradient() {
        let set = interval(5.0);
        let states = vec![AgentState {
            x: array![2.0],
            q: array![0.0],
        }];
        let w = MixingMatrix::singleton();
        let loss = QuadraticLoss::new(array![[1.0]], array![0.0]).unwrap();
        // g(x) = x - 100 is strictly negative on the set.
        let cons = AffineConstraint::new(array![[1.0]], array![100.0]).unwrap();
        let steps = StepValues {
            alpha: 0.5,
            ..unit_steps()
        };
        let (next, _) = full_info_round(&states, &w, &[loss], &[cons], &set, &steps).unwrap();
        // x+ = x - 0.5 * grad = 2 - 0.5 * 2 = 1; dual stays zero.
        assert_eq!(next[0].x, array![1.0]);
        assert_eq!(next[0].q, array![0.0]);
    }

    #[test]
    fn identical_agents_stay_identical() {
        let set = DecisionSet::symmetric_box(5.0, 2).unwrap();
        let state = AgentState {
            x: array![1.0, -2.0],
            q: array![0.0],
        };
        let states = vec![state.clone(), state.clone(), state];
        let w = crate::network::generate_er_path_mixing::<f64>(3, 0.5, 1, 0).unwrap();
        let loss = QuadraticLoss::new(array![[1.0, 0.5], [0.0, 1.0]], array![0.3, -0.7]).unwrap();
        let cons = AffineConstraint::new(array![[1.0, 1.0]], array![0.5]).unwrap();
        let losses = vec![loss.clone(), loss.clone(), loss];
        let conss = vec![cons.clone(), cons.clone(), cons];
        let steps = StepValues {
            alpha: 0.3,
            beta: 0.5,
            gamma: 0.5,
            xi: None,
            delta: None,
        };
        let (next, _) = full_info_round(&states, &w, &losses, &conss, &set, &steps).unwrap();
        assert_eq!(next[0], next[1]);
        assert_eq!(next[1], next[2]);
        // Consensus fixed point: z equals x for identical rows.
        assert_eq!(next[0].x, set.project(&(&states_x() - &grad_dir()).view()).unwrap());

        fn states_x() -> Array1<f64> {
            array![1.0, -2.0]
        }
        fn grad_dir() -> Array1<f64> {
            // alpha * (df + d[g]_+ q) with q = 0.
            let loss =
                QuadraticLoss::new(array![[1.0, 0.5], [0.0, 1.0]], array![0.3, -0.7]).unwrap();
            loss.subgradient(&states_x().view()) * 0.3
        }
    }

    #[test]
    fn loss_gradient_estimator_affine_case() {
        // f(x) = <c, x>: estimator along e1 returns p * c_1 * e1.
        let set = DecisionSet::symmetric_box(5.0, 3).unwrap();
        let loss = AffineLossN {
            c: array![2.0, -1.0, 0.5],
        };
        let x = array![0.0, 1.0, -1.0];
        let u = array![1.0, 0.0, 0.0];
        let g = two_point_loss_gradient(&loss, &set, &x.view(), 0.25, &u.view()).unwrap();
        assert!((g[0] - 3.0 * 2.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], 0.0);

        struct AffineLossN {
            c: Array1<f64>,
        }
        impl LossFunction<f64> for AffineLossN {
            fn value(&self, x: &ArrayView1<f64>) -> f64 {
                self.c.dot(x)
            }
            fn subgradient(&self, _x: &ArrayView1<f64>) -> Array1<f64> {
                self.c.clone()
            }
        }
    }

    #[test]
    fn loss_gradient_estimator_constant_is_zero() {
        let set = interval(5.0);
        let loss = AffineLoss {
            c: array![0.0],
            b: 3.0,
        };
        let g =
            two_point_loss_gradient(&loss, &set, &array![1.0].view(), 0.1, &array![1.0].view())
                .unwrap();
        assert_eq!(g, array![0.0]);
    }

    #[test]
    fn estimator_rejects_probe_outside_set() {
        let set = interval(1.0);
        let loss = AffineLoss {
            c: array![1.0],
            b: 0.0,
        };
        let err =
            two_point_loss_gradient(&loss, &set, &array![0.9].view(), 0.5, &array![1.0].view());
        assert!(err.is_err());
        let err = two_point_loss_gradient(
            &loss,
            &set,
            &array![0.5].view(),
            0.1,
            &array![1.1].view(),
        );
        assert!(err.is_err(), "non-unit direction must be rejected");
    }

    #[test]
    fn estimator_mean_matches_gradient_of_quadratic() {
        // For quadratic f the smoothed gradient equals the true gradient,
        // so the Monte-Carlo mean of the estimator converges to it.
        let set = DecisionSet::symmetric_box(5.0, 3).unwrap();
        let loss = QuadraticLoss::new(
            array![[1.0, 0.2, -0.4], [0.0, 0.8, 0.3]],
            array![0.5, -0.1],
        )
        .unwrap();
        let x = array![0.4, -0.2, 1.1];
        let delta = 0.05;
        let truth = loss.subgradient(&x.view());
        let samples = 100_000;
        let mut rng = stream_rng(123, StreamPurpose::Direction, 0, 0);
        let mut mean = Array1::<f64>::zeros(3);
        let mut sq = Array1::<f64>::zeros(3);
        for _ in 0..samples {
            let u = sample_unit_sphere::<f64>(&mut rng, 3);
            let g = two_point_loss_gradient(&loss, &set, &x.view(), delta, &u.view()).unwrap();
            mean = mean + &g;
            sq = sq + &g.mapv(|v| v * v);
        }
        mean = mean / samples as f64;
        for k in 0..3 {
            let var = (sq[k] / samples as f64 - mean[k] * mean[k]).max(0.0);
            let sigma = (var / samples as f64).sqrt();
            assert!(
                (mean[k] - truth[k]).abs() <= 3.0 * sigma + 1e-3,
                "coordinate {k}: mean {} truth {} sigma {}",
                mean[k],
                truth[k],
                sigma
            );
        }
    }

    #[test]
    fn constraint_jacobian_estimator_cases() {
        let set = interval(5.0);
        // Strictly negative at both points -> zero matrix.
        let inactive = AffineConstraint::new(array![[1.0]], array![100.0]).unwrap();
        let j = two_point_constraint_jacobian(
            &inactive,
            &set,
            &array![0.0].view(),
            0.1,
            &array![1.0].view(),
        )
        .unwrap();
        assert_eq!(j, array![[0.0]]);

        // g(x) = x - 1 at x = 2, delta = 0.1, u = 1 -> ((1.1 - 1)/0.1) = 1.
        let active = AffineConstraint::new(array![[1.0]], array![1.0]).unwrap();
        let j = two_point_constraint_jacobian(
            &active,
            &set,
            &array![2.0].view(),
            0.1,
            &array![1.0].view(),
        )
        .unwrap();
        assert!((j[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_jacobian_matches_brute_force() {
        let set = DecisionSet::symmetric_box(5.0, 2).unwrap();
        let cons = AffineConstraint::new(
            array![[0.8, -0.3], [-0.2, 0.9], [0.5, 0.5]],
            array![0.4, 0.1, -0.2],
        )
        .unwrap();
        let x = array![0.7, 0.2];
        let delta = 0.05;
        let mut rng = stream_rng(5, StreamPurpose::Direction, 0, 0);
        for _ in 0..50 {
            let u = sample_unit_sphere::<f64>(&mut rng, 2);
            let jac =
                two_point_constraint_jacobian(&cons, &set, &x.view(), delta, &u.view()).unwrap();
            // Independent recomputation straight from the definition.
            let probe = &x + &(&u * delta);
            let gp = cons.value(&probe.view()).mapv(|v| v.max(0.0));
            let gx = cons.value(&x.view()).mapv(|v| v.max(0.0));
            for j in 0..3 {
                let scale = 2.0 / delta * (gp[j] - gx[j]);
                for k in 0..2 {
                    assert!((jac[[k, j]] - scale * u[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bandit_round_hand_example() {
        // n = 1, p = 1: straight-line recomputation of the four updates.
        let set = interval(5.0);
        let xi_now = 0.5;
        let xi_next = 1.0 / 3.0;
        let delta = 0.5;
        let x0 = 1.0;
        let q0 = 0.25;
        let states = vec![AgentState {
            x: array![x0],
            q: array![q0],
        }];
        let w = MixingMatrix::singleton();
        let loss = QuadraticLoss::new(array![[1.0]], array![2.0]).unwrap();
        let cons = AffineConstraint::new(array![[1.0]], array![0.5]).unwrap();
        let current = StepValues {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            xi: Some(xi_now),
            delta: Some(delta),
        };
        let steps = StepValues {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
            xi: Some(xi_next),
            delta: Some(5.0 * xi_next),
        };
        let u = array![1.0];
        let (next, _) = bandit_round(
            &states,
            &w,
            &[loss.clone()],
            &[cons.clone()],
            &set,
            &[u.clone()],
            &current,
            &steps,
        )
        .unwrap();

        // Straight-line recomputation.
        let f = |x: f64| 0.5 * (x - 2.0) * (x - 2.0);
        let g = |x: f64| x - 0.5;
        let grad_hat = 1.0 / delta * (f(x0 + delta) - f(x0)) * 1.0;
        let jac_hat = 1.0 / delta * (g(x0 + delta).max(0.0) - g(x0).max(0.0)) * 1.0;
        let omega = grad_hat + jac_hat * q0;
        let bound = (1.0 - xi_next) * 5.0;
        let x1 = (x0 - 0.5 * omega).clamp(-bound, bound);
        let b = g(x0).max(0.0) + jac_hat * (x1 - x0);
        let q1 = ((1.0 - 0.25) * q0 + 0.5 * b).max(0.0);

        assert!((next[0].x[0] - x1).abs() < 1e-12);
        assert!((next[0].q[0] - q1).abs() < 1e-12);
    }

    #[test]
    fn bandit_round_is_deterministic_given_directions() {
        let set = DecisionSet::symmetric_box(5.0, 2).unwrap();
        let run = || {
            let states = vec![AgentState {
                x: array![0.5, -0.5],
                q: array![0.1],
            }];
            let w = MixingMatrix::singleton();
            let loss =
                QuadraticLoss::new(array![[0.6, -0.1], [0.2, 0.9]], array![0.4, 0.3]).unwrap();
            let cons = AffineConstraint::new(array![[1.0, 0.5]], array![0.2]).unwrap();
            let current = StepValues {
                alpha: 1.0,
                beta: 1.0,
                gamma: 1.0,
                xi: Some(0.5),
                delta: Some(1.0),
            };
            let steps = StepValues {
                alpha: 0.5,
                beta: 0.5,
                gamma: 0.5,
                xi: Some(1.0 / 3.0),
                delta: Some(5.0 / 3.0),
            };
            let u = array![std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
            bandit_round(&states, &w, &[loss], &[cons], &set, &[u], &current, &steps).unwrap()
        };
        let (a, _) = run();
        let (b, _) = run();
        assert_eq!(a, b);
    }

    #[test]
    fn bandit_affine_inactive_reduces_to_projected_estimator_step() {
        // f affine, g inactive: x+ = P((1-xi')X)(x - alpha p (c . u) u).
        let set = interval(5.0);
        let states = vec![AgentState {
            x: array![1.0],
            q: array![0.0],
        }];
        let w = MixingMatrix::singleton();
        let loss = AffineLoss {
            c: array![0.8],
            b: 0.1,
        };
        let cons = AffineConstraint::new(array![[1.0]], array![100.0]).unwrap();
        let current = StepValues {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            xi: Some(0.5),
            delta: Some(0.5),
        };
        let steps = StepValues {
            alpha: 0.25,
            beta: 0.5,
            gamma: 0.5,
            xi: Some(0.25),
            delta: Some(1.25),
        };
        let (next, _) = bandit_round(
            &states,
            &w,
            &[loss],
            &[cons],
            &set,
            &[array![1.0]],
            &current,
            &steps,
        )
        .unwrap();
        let expect = (1.0 - 0.25 * 0.8f64).clamp(-3.75, 3.75);
        assert!((next[0].x[0] - expect).abs() < 1e-12);
        assert_eq!(next[0].q, array![0.0]);
    }

    #[test]
    fn dual_stays_nonnegative_under_iteration() {
        let set = DecisionSet::symmetric_box(5.0, 2).unwrap();
        let mut states = vec![
            AgentState {
                x: array![3.0, -1.0],
                q: array![0.0, 0.0],
            };
            3
        ];
        let loss = QuadraticLoss::new(array![[1.0, 0.0], [0.0, 1.0]], array![4.0, 4.0]).unwrap();
        let cons =
            AffineConstraint::new(array![[1.0, 0.2], [0.3, 1.0]], array![0.5, 0.7]).unwrap();
        let schedule = crate::schedule::StepSchedule::convex_full(1.0, 0.5).unwrap();
        for t in 1..=200 {
            let w = crate::network::generate_er_path_mixing::<f64>(3, 0.3, t, 1).unwrap();
            let steps = schedule.at(t + 1).unwrap();
            let losses = vec![loss.clone(), loss.clone(), loss.clone()];
            let conss = vec![cons.clone(), cons.clone(), cons.clone()];
            let (next, _) =
                full_info_round(&states, &w, &losses, &conss, &set, &steps).unwrap();
            for s in &next {
                assert!(s.q.iter().all(|&v| v >= 0.0));
                assert!(set.contains(&s.x.view(), 1e-12));
            }
            states = next;
        }
    }

    /// Logs which neighbor decisions an update reads.
    struct LoggingStates<'a> {
        inner: &'a [AgentState<f64>],
        reads: RefCell<Vec<usize>>,
    }

    impl PrimalAccess<f64> for LoggingStates<'_> {
        fn len(&self) -> usize {
            self.inner.len()
        }
        fn primal(&self, j: usize) -> ArrayView1<'_, f64> {
            self.reads.borrow_mut().push(j);
            self.inner[j].x.view()
        }
    }

    #[test]
    fn update_reads_only_neighbor_states() {
        let n = 6;
        let set = DecisionSet::symmetric_box(5.0, 2).unwrap();
        let states: Vec<_> = (0..n)
            .map(|i| AgentState {
                x: array![i as f64, -(i as f64)],
                q: array![0.0],
            })
            .collect();
        let w = crate::network::generate_er_path_mixing::<f64>(n, 0.2, 4, 17).unwrap();
        let loss = QuadraticLoss::new(array![[1.0, 0.0]], array![0.0]).unwrap();
        let cons = AffineConstraint::new(array![[1.0, 1.0]], array![0.3]).unwrap();
        let steps = StepValues {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
            xi: None,
            delta: None,
        };
        for i in 0..n {
            let logger = LoggingStates {
                inner: &states,
                reads: RefCell::new(Vec::new()),
            };
            let (_, _) = full_info_agent_update(
                i, &logger, &states[i], &w, &loss, &cons, &set, &steps,
            )
            .unwrap();
            let mut reads = logger.reads.into_inner();
            reads.sort_unstable();
            reads.dedup();
            assert_eq!(reads, w.in_neighbors(i), "agent {i}");
        }
    }

    #[test]
    fn single_agent_matches_centralized_template() {
        // With W = [1] the distributed update must reproduce the
        // centralized primal-dual template step for step.
        let set = interval(5.0);
        let loss = QuadraticLoss::new(array![[1.2]], array![1.0]).unwrap();
        let cons = AffineConstraint::new(array![[0.9]], array![0.3]).unwrap();
        let schedule = crate::schedule::StepSchedule::convex_full(1.0, 0.5).unwrap();
        let mut state = AgentState {
            x: array![0.0],
            q: array![0.0],
        };
        let w = MixingMatrix::singleton();
        for t in 1..=25 {
            let steps = schedule.at(t + 1).unwrap();
            let (next, _) = full_info_round(
                &[state.clone()],
                &w,
                &[loss.clone()],
                &[cons.clone()],
                &set,
                &steps,
            )
            .unwrap();

            // Centralized template, straight-line.
            let x = state.x[0];
            let q = state.q[0];
            let grad = loss.subgradient(&array![x].view())[0];
            let gv = cons.value(&array![x].view())[0];
            let dgc = if gv < 0.0 { 0.0 } else { 0.9 };
            let omega = grad + dgc * q;
            let x1 = (x - steps.alpha * omega).clamp(-5.0, 5.0);
            let b = gv.max(0.0) + dgc * (x1 - x);
            let q1 = ((1.0 - steps.beta * steps.gamma) * q + steps.gamma * b).max(0.0);
            assert!((next[0].x[0] - x1).abs() < 1e-14, "round {t}");
            assert!((next[0].q[0] - q1).abs() < 1e-14, "round {t}");
            state = next.into_iter().next().unwrap();
        }
    }

    #[test]
    fn sphere_samples_are_unit_and_balanced() {
        let mut rng = stream_rng(2024, StreamPurpose::Direction, 0, 0);
        // p = 1: only +1 and -1, roughly balanced.
        let mut pos = 0usize;
        for _ in 0..10_000 {
            let u = sample_unit_sphere::<f64>(&mut rng, 1);
            assert!(u[0] == 1.0 || u[0] == -1.0);
            if u[0] == 1.0 {
                pos += 1;
            }
        }
        assert!((4_700..=5_300).contains(&pos), "pos = {pos}");

        for p in [2usize, 5, 16] {
            for _ in 0..100 {
                let u = sample_unit_sphere::<f64>(&mut rng, p);
                assert!((norm2(&u.view()) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sphere_mean_concentrates() {
        let p = 3;
        let draws = 1_000_000usize;
        let mut rng = stream_rng(7, StreamPurpose::Direction, 1, 1);
        let mut mean = Array1::<f64>::zeros(p);
        for _ in 0..draws {
            mean = mean + &sample_unit_sphere::<f64>(&mut rng, p);
        }
        mean = mean / draws as f64;
        // Per-coordinate variance is 1/p; allow 4 sigma.
        let bound = 4.0 / ((p as f64).sqrt() * (draws as f64).sqrt());
        for k in 0..p {
            assert!(mean[k].abs() <= bound, "coordinate {k}: {}", mean[k]);
        }
    }
}
