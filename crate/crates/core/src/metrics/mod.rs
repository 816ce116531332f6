//! Performance measures: network regret, cumulative and standard
//! constraint violation, comparator construction, path length,
//! disagreement, and empirical growth-rate fits.

mod comparator;

pub use comparator::{
    dynamic_comparator, grid_refine, static_comparator, ComparatorWorkspace, PenaltyParams,
    QuadObjective,
};

use ndarray::{Array1, ArrayView1};

use crate::error::{CoreError, Result};
use crate::problem::{clipped_value, norm2, ProblemInstance};
use crate::scalar::Real;

/// Full decision history of one run: `decisions[t-1][i]` is agent `i`'s
/// decision at round `t`.
#[derive(Debug, Clone)]
pub struct RunTrace<T> {
    decisions: Vec<Vec<Array1<T>>>,
    agents: usize,
}

impl<T: Real> RunTrace<T> {
    pub fn new(agents: usize) -> Self {
        Self {
            decisions: Vec::new(),
            agents,
        }
    }

    pub fn push_round(&mut self, round: Vec<Array1<T>>) {
        assert_eq!(round.len(), self.agents, "one decision per agent");
        self.decisions.push(round);
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn horizon(&self) -> usize {
        self.decisions.len()
    }

    /// Decision of agent `i` at round `t` (1-based).
    pub fn decision(&self, agent: usize, round: usize) -> ArrayView1<'_, T> {
        self.decisions[round - 1][agent].view()
    }

    pub fn round(&self, round: usize) -> &[Array1<T>] {
        &self.decisions[round - 1]
    }
}

/// Benchmark decision sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorKind {
    Static,
    Dynamic,
    Custom,
}

/// A comparator sequence with its feasibility certificate and cumulative
/// objective.
#[derive(Debug, Clone)]
pub struct ComparatorSequence<T> {
    pub kind: ComparatorKind,
    /// `y_1 ... y_T`.
    pub points: Vec<Array1<T>>,
    /// `max_t ||[g_t(y_t)]_+||`.
    pub feasibility: T,
    /// `sum_t f_t(y_t)`.
    pub objective: T,
}

impl<T: Real> ComparatorSequence<T> {
    pub fn horizon(&self) -> usize {
        self.points.len()
    }
}

/// Network regret of a trace against a comparator sequence:
/// `(1/n) sum_i sum_t f_t(x_{i,t}) - sum_t f_t(y_t)`.
pub fn network_regret<T: Real>(
    trace: &RunTrace<T>,
    comparator: &ComparatorSequence<T>,
    instance: &ProblemInstance<T>,
) -> Result<T> {
    if comparator.horizon() != trace.horizon() {
        return Err(CoreError::dim(
            "comparator horizon",
            trace.horizon(),
            comparator.horizon(),
        ));
    }
    let n = T::of_usize(trace.agents());
    let mut learner = T::zero();
    let mut benchmark = T::zero();
    for t in 1..=trace.horizon() {
        let (losses, _) = instance.round_oracles(t);
        for i in 0..trace.agents() {
            learner = learner + ProblemInstance::global_loss(&losses, &trace.decision(i, t));
        }
        benchmark =
            benchmark + ProblemInstance::global_loss(&losses, &comparator.points[t - 1].view());
    }
    Ok(learner / n - benchmark)
}

/// Cumulative constraint violation
/// `(1/n) sum_i sum_t ||[g_t(x_{i,t})]_+||` with the stacked global
/// constraint.
pub fn cumulative_violation<T: Real>(trace: &RunTrace<T>, instance: &ProblemInstance<T>) -> T {
    let n = T::of_usize(trace.agents());
    let mut total = T::zero();
    for t in 1..=trace.horizon() {
        let (_, constraints) = instance.round_oracles(t);
        for i in 0..trace.agents() {
            let g = ProblemInstance::global_constraint(&constraints, &trace.decision(i, t));
            total = total + norm2(&clipped_value(&g.view()).view());
        }
    }
    total / n
}

/// Standard (compensable) violation
/// `(1/n) sum_i ||[sum_t g_t(x_{i,t})]_+||`.
pub fn standard_violation<T: Real>(trace: &RunTrace<T>, instance: &ProblemInstance<T>) -> T {
    let n = trace.agents();
    let m = instance.total_constraint_dim();
    let mut sums = vec![Array1::<T>::zeros(m); n];
    for t in 1..=trace.horizon() {
        let (_, constraints) = instance.round_oracles(t);
        for (i, sum) in sums.iter_mut().enumerate() {
            *sum = &*sum + &ProblemInstance::global_constraint(&constraints, &trace.decision(i, t));
        }
    }
    let total = sums
        .iter()
        .fold(T::zero(), |acc, s| acc + norm2(&clipped_value(&s.view()).view()));
    total / T::of_usize(n)
}

/// Path length `P_T = sum_{t=1}^{T-1} ||y_{t+1} - y_t||`.
pub fn path_length<T: Real>(comparator: &ComparatorSequence<T>) -> T {
    comparator
        .points
        .windows(2)
        .fold(T::zero(), |acc, w| acc + norm2(&(&w[1] - &w[0]).view()))
}

/// Maximum distance of any agent from the round mean,
/// `max_i ||x_{i,t} - xbar_t||`.
pub fn disagreement<T: Real>(trace: &RunTrace<T>, round: usize) -> T {
    let states = trace.round(round);
    let n = T::of_usize(states.len());
    let dim = states[0].len();
    let mut mean = Array1::<T>::zeros(dim);
    for s in states {
        mean = mean + s;
    }
    mean = mean / n;
    states
        .iter()
        .map(|s| norm2(&(s - &mean).view()))
        .fold(T::zero(), T::max)
}

/// Least-squares slope of `log(value)` against `log(T)`.
pub fn empirical_rate<T: Real>(series: &[(usize, T)]) -> Result<T> {
    if series.len() < 3 {
        return Err(CoreError::arg("series", "need at least 3 points"));
    }
    let mut prev = 0usize;
    for &(t, v) in series {
        if t <= prev {
            return Err(CoreError::arg("series", "horizons must increase"));
        }
        if v <= T::zero() {
            return Err(CoreError::arg("series", "values must be positive"));
        }
        prev = t;
    }
    let n = T::of_usize(series.len());
    let logs: Vec<(T, T)> = series
        .iter()
        .map(|&(t, v)| (T::of_usize(t).ln(), v.ln()))
        .collect();
    let mean_x = logs.iter().fold(T::zero(), |a, &(x, _)| a + x) / n;
    let mean_y = logs.iter().fold(T::zero(), |a, &(_, y)| a + y) / n;
    let mut cov = T::zero();
    let mut var = T::zero();
    for &(x, y) in &logs {
        cov = cov + (x - mean_x) * (y - mean_y);
        var = var + (x - mean_x) * (x - mean_x);
    }
    Ok(cov / var)
}
