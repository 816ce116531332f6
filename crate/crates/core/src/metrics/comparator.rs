//! Benchmark (comparator) construction.
//!
//! The static comparator minimizes the cumulative global loss subject to
//! every round's constraints; the dynamic comparator solves each round
//! separately. Neither problem satisfies Slater's condition once the
//! constraints are clipped, so both are solved with an exact penalty:
//! projected subgradient descent on
//! `F(x) + lambda sum_t ||[g_t(x)]_+||` over the decision set, with
//! `lambda = 10 F_2 sqrt(m) R(X)` and feasibility tolerance 1e-6.
//!
//! Two refinements keep that tractable at long horizons without changing
//! the contract: rounds enter the penalty lazily (violated rounds are
//! added until a full scan certifies feasibility), and an active-set
//! polish solves the small KKT system suggested by the subgradient
//! iterate exactly, which the driver accepts only when it checks out.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};

use crate::error::{CoreError, Result};
use crate::metrics::{ComparatorKind, ComparatorSequence};
use crate::problem::{norm2, DecisionSet, ProblemInstance};
use crate::scalar::Real;

/// Accumulated quadratic objective `F(x) = 1/2 x' P x - b' x + c`.
#[derive(Debug, Clone)]
pub struct QuadObjective<T> {
    p_mat: Array2<T>,
    b: Array1<T>,
    c: T,
}

impl<T: Real> QuadObjective<T> {
    pub fn zero(dim: usize) -> Self {
        Self {
            p_mat: Array2::zeros((dim, dim)),
            b: Array1::zeros(dim),
            c: T::zero(),
        }
    }

    /// Adds the global loss of one round: the average over agents of
    /// `1/2 ||H x - z||^2 + ridge/2 ||x||^2`.
    pub fn add_round(&mut self, losses: &[crate::problem::QuadraticLoss<T>]) {
        let n = T::of_usize(losses.len());
        let half = T::of(0.5);
        for loss in losses {
            let h = loss.matrix();
            let z = loss.target();
            self.p_mat = &self.p_mat + &(h.t().dot(h) / n);
            self.b = &self.b + &(h.t().dot(z) / n);
            self.c = self.c + half * z.dot(z) / n;
            let ridge = loss.ridge();
            if ridge > T::zero() {
                for k in 0..self.p_mat.nrows() {
                    self.p_mat[[k, k]] = self.p_mat[[k, k]] + ridge / n;
                }
            }
        }
    }

    pub fn value(&self, x: &ArrayView1<T>) -> T {
        let px = self.p_mat.dot(x);
        T::of(0.5) * x.dot(&px) - self.b.dot(x) + self.c
    }

    pub fn gradient(&self, x: &ArrayView1<T>) -> Array1<T> {
        self.p_mat.dot(x) - &self.b
    }
}

/// Penalty solver parameters. The defaults pin the contract values; the
/// stall window only stops iterating once the incumbent has been flat.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyParams<T> {
    pub lambda: T,
    pub max_iters: usize,
    pub feasibility_tol: T,
    pub stall_window: usize,
    pub step0: T,
}

impl<T: Real> PenaltyParams<T> {
    /// `lambda = 10 F_2 sqrt(m) R(X)` from the instance constants.
    pub fn from_instance(instance: &ProblemInstance<T>) -> Self {
        let c = instance.constants();
        let m = T::of_usize(instance.total_constraint_dim());
        Self {
            lambda: T::of(10.0) * c.f2 * m.sqrt() * c.outer_radius,
            max_iters: 100_000,
            feasibility_tol: T::of(1e-6),
            stall_window: 400,
            step0: c.outer_radius * T::of(0.1),
        }
    }
}

/// Flat row-major storage for stacked per-round affine constraints.
struct ConstraintRows<T> {
    flat: Vec<T>,
    offsets: Vec<T>,
    dim: usize,
    /// Rows per round.
    group: usize,
}

impl<T: Real> ConstraintRows<T> {
    fn new(dim: usize, group: usize) -> Self {
        Self {
            flat: Vec::new(),
            offsets: Vec::new(),
            dim,
            group,
        }
    }

    fn rounds(&self) -> usize {
        if self.group == 0 {
            0
        } else {
            self.offsets.len() / self.group
        }
    }

    fn add_round(&mut self, constraints: &[crate::problem::AffineConstraint<T>]) {
        for c in constraints {
            for row in c.matrix().rows() {
                self.flat.extend(row.iter().copied());
            }
            self.offsets.extend(c.offset().iter().copied());
        }
    }

    fn rows_view(&self) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((self.offsets.len(), self.dim), &self.flat)
            .expect("flat buffer matches row count")
    }

    /// Residual `max_t ||[g_t(x)]_+||` over rounds `[0, upto)`, plus the
    /// indices of the worst violated rounds (descending) above `tol`.
    fn scan(&self, x: &ArrayView1<T>, upto: usize, tol: T) -> (T, Vec<usize>) {
        let rows = self.rows_view();
        let mut worst = T::zero();
        let mut violated: Vec<(T, usize)> = Vec::new();
        for t in 0..upto {
            let mut sq = T::zero();
            for r in t * self.group..(t + 1) * self.group {
                let v = rows.row(r).dot(x) - self.offsets[r];
                if v > T::zero() {
                    sq = sq + v * v;
                }
            }
            let res = sq.sqrt();
            worst = worst.max(res);
            if res > tol {
                violated.push((res, t));
            }
        }
        violated.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        (worst, violated.into_iter().map(|(_, t)| t).collect())
    }

    /// Copies the rows of the given rounds into a dense working stack.
    fn gather(&self, rounds: &[usize]) -> (Array2<T>, Array1<T>) {
        let rows = self.rows_view();
        let mut mat = Array2::zeros((rounds.len() * self.group, self.dim));
        let mut off = Array1::zeros(rounds.len() * self.group);
        for (k, &t) in rounds.iter().enumerate() {
            for j in 0..self.group {
                mat.row_mut(k * self.group + j)
                    .assign(&rows.row(t * self.group + j));
                off[k * self.group + j] = self.offsets[t * self.group + j];
            }
        }
        (mat, off)
    }
}

/// Incremental comparator state for checkpointed runs: extends the
/// cumulative objective and constraint stack round by round, solves the
/// static problem on demand (warm-started), and optionally tracks the
/// per-round dynamic benchmark as it goes.
pub struct ComparatorWorkspace<T> {
    set: DecisionSet<T>,
    params: PenaltyParams<T>,
    quad: QuadObjective<T>,
    stack: ConstraintRows<T>,
    rounds_done: usize,
    warm_static: Option<Array1<T>>,
    dynamic: Option<DynamicTracker<T>>,
}

struct DynamicTracker<T> {
    cumulative_objective: T,
    path_length: T,
    worst_residual: T,
    previous: Option<Array1<T>>,
}

/// Scalar summary of the dynamic benchmark.
#[derive(Debug, Clone, Copy)]
pub struct DynamicSummary<T> {
    pub cumulative_objective: T,
    pub path_length: T,
    pub worst_residual: T,
}

/// A solved static benchmark at the current horizon.
#[derive(Debug, Clone)]
pub struct StaticSolution<T> {
    pub point: Array1<T>,
    pub objective: T,
    pub residual: T,
}

impl<T: Real> ComparatorWorkspace<T> {
    pub fn new(instance: &ProblemInstance<T>, track_dynamic: bool) -> Self {
        Self {
            set: instance.set().clone(),
            params: PenaltyParams::from_instance(instance),
            quad: QuadObjective::zero(instance.dim()),
            stack: ConstraintRows::new(instance.dim(), instance.total_constraint_dim()),
            rounds_done: 0,
            warm_static: None,
            dynamic: track_dynamic.then(|| DynamicTracker {
                cumulative_objective: T::zero(),
                path_length: T::zero(),
                worst_residual: T::zero(),
                previous: None,
            }),
        }
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// Ingests rounds up to and including `round`.
    pub fn extend_to(&mut self, instance: &ProblemInstance<T>, round: usize) -> Result<()> {
        while self.rounds_done < round {
            let t = self.rounds_done + 1;
            let (losses, constraints) = instance.round_oracles(t);
            let mut round_quad = QuadObjective::zero(instance.dim());
            round_quad.add_round(&losses);
            self.quad.p_mat = &self.quad.p_mat + &round_quad.p_mat;
            self.quad.b = &self.quad.b + &round_quad.b;
            self.quad.c = self.quad.c + round_quad.c;

            let before = self.stack.offsets.len();
            self.stack.add_round(&constraints);
            debug_assert_eq!(self.stack.offsets.len() - before, self.stack.group);

            if self.dynamic.is_some() {
                let mut round_stack = ConstraintRows::new(instance.dim(), self.stack.group);
                round_stack.add_round(&constraints);
                let warm = self
                    .dynamic
                    .as_ref()
                    .and_then(|d| d.previous.clone())
                    .unwrap_or_else(|| Array1::zeros(instance.dim()));
                let sol = solve_constrained_quadratic(
                    &self.set,
                    &round_quad,
                    &round_stack,
                    1,
                    &self.params,
                    warm,
                )?;
                let tracker = self.dynamic.as_mut().expect("dynamic tracking enabled");
                tracker.cumulative_objective = tracker.cumulative_objective + sol.objective;
                tracker.worst_residual = tracker.worst_residual.max(sol.residual);
                if let Some(prev) = &tracker.previous {
                    tracker.path_length =
                        tracker.path_length + norm2(&(&sol.point - prev).view());
                }
                tracker.previous = Some(sol.point);
            }
            self.rounds_done = t;
        }
        Ok(())
    }

    /// Solves the static problem over all ingested rounds.
    pub fn static_solution(&mut self) -> Result<StaticSolution<T>> {
        let warm = self
            .warm_static
            .clone()
            .unwrap_or_else(|| Array1::zeros(self.set.dim()));
        let sol = solve_constrained_quadratic(
            &self.set,
            &self.quad,
            &self.stack,
            self.rounds_done,
            &self.params,
            warm,
        )?;
        self.warm_static = Some(sol.point.clone());
        Ok(sol)
    }

    pub fn dynamic_summary(&self) -> Option<DynamicSummary<T>> {
        self.dynamic.as_ref().map(|d| DynamicSummary {
            cumulative_objective: d.cumulative_objective,
            path_length: d.path_length,
            worst_residual: d.worst_residual,
        })
    }
}

/// The optimal static decision sequence over `horizon` rounds.
pub fn static_comparator<T: Real>(
    instance: &ProblemInstance<T>,
    horizon: usize,
) -> Result<ComparatorSequence<T>> {
    if horizon == 0 || horizon > instance.horizon() {
        return Err(CoreError::arg("horizon", "must lie in 1..=T"));
    }
    let mut ws = ComparatorWorkspace::new(instance, false);
    ws.extend_to(instance, horizon)?;
    let sol = ws.static_solution()?;
    Ok(ComparatorSequence {
        kind: ComparatorKind::Static,
        points: vec![sol.point; horizon],
        feasibility: sol.residual,
        objective: sol.objective,
    })
}

/// The optimal dynamic decision sequence: per-round constrained minima.
pub fn dynamic_comparator<T: Real>(
    instance: &ProblemInstance<T>,
    horizon: usize,
) -> Result<ComparatorSequence<T>> {
    if horizon == 0 || horizon > instance.horizon() {
        return Err(CoreError::arg("horizon", "must lie in 1..=T"));
    }
    let set = instance.set().clone();
    let params = PenaltyParams::from_instance(instance);
    let group = instance.total_constraint_dim();
    let mut points = Vec::with_capacity(horizon);
    let mut objective = T::zero();
    let mut feasibility = T::zero();
    let mut warm = Array1::zeros(instance.dim());
    for t in 1..=horizon {
        let (losses, constraints) = instance.round_oracles(t);
        let mut quad = QuadObjective::zero(instance.dim());
        quad.add_round(&losses);
        let mut stack = ConstraintRows::new(instance.dim(), group);
        stack.add_round(&constraints);
        let sol = solve_constrained_quadratic(&set, &quad, &stack, 1, &params, warm)?;
        objective = objective + sol.objective;
        feasibility = feasibility.max(sol.residual);
        warm = sol.point.clone();
        points.push(sol.point);
    }
    Ok(ComparatorSequence {
        kind: ComparatorKind::Dynamic,
        points,
        feasibility,
        objective,
    })
}

/// Solves `min F(x) s.t. g_t(x) <= 0 for t < rounds, x in set` by lazy
/// constraint generation around the penalty solver.
fn solve_constrained_quadratic<T: Real>(
    set: &DecisionSet<T>,
    quad: &QuadObjective<T>,
    stack: &ConstraintRows<T>,
    rounds: usize,
    params: &PenaltyParams<T>,
    warm: Array1<T>,
) -> Result<StaticSolution<T>> {
    debug_assert!(rounds <= stack.rounds());
    let mut x = set.project(&warm.view())?;
    let mut working: Vec<usize> = Vec::new();
    let mut in_working = vec![false; rounds];
    const MAX_PASSES: usize = 60;
    const ADD_PER_PASS: usize = 8;

    // Solve on the working set, scan the full stack, admit the worst
    // violated rounds, repeat. Termination with an empty violation list
    // means the working-set optimum is feasible for every round, hence
    // optimal for the full problem (up to inner-solve accuracy).
    let mut residual;
    let mut pass = 0;
    loop {
        let (rows, offs) = stack.gather(&working);
        let (candidate, phi) = penalty_projected_subgradient(
            set,
            quad,
            &rows.view(),
            &offs.view(),
            stack.group,
            params,
            x,
        )?;
        x = candidate;
        if let Some(polished) = kkt_polish(set, quad, &rows.view(), &offs.view(), &x) {
            // The polished point satisfies the working set, so its
            // penalized objective is its plain objective.
            let tiny = T::of(1e-9) * (T::one() + phi.abs());
            if quad.value(&polished.view()) <= phi + tiny {
                x = polished;
            }
        }
        let (worst, violated) = stack.scan(&x.view(), rounds, params.feasibility_tol);
        residual = worst;
        pass += 1;
        if violated.is_empty() || pass >= MAX_PASSES {
            break;
        }
        let mut added = 0;
        for t in violated {
            if !in_working[t] {
                in_working[t] = true;
                working.push(t);
                added += 1;
                if added >= ADD_PER_PASS {
                    break;
                }
            }
        }
        if added == 0 {
            // Everything violated is already in the working set: the inner
            // solve is as good as it gets at this tolerance.
            break;
        }
    }

    if residual > params.feasibility_tol {
        x = repair_toward_origin(stack, rounds, params, x)?;
        residual = stack.scan(&x.view(), rounds, params.feasibility_tol).0;
    }
    if residual > params.feasibility_tol {
        return Err(CoreError::InfeasibleComparator {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tolerance: params.feasibility_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let objective = quad.value(&x.view());
    Ok(StaticSolution {
        point: x,
        objective,
        residual,
    })
}

/// Projected subgradient descent on the exact-penalty objective with
/// normalized diminishing steps. Returns the best iterate seen and its
/// penalized objective.
fn penalty_projected_subgradient<T: Real>(
    set: &DecisionSet<T>,
    quad: &QuadObjective<T>,
    rows: &ArrayView2<T>,
    offs: &ArrayView1<T>,
    group: usize,
    params: &PenaltyParams<T>,
    start: Array1<T>,
) -> Result<(Array1<T>, T)> {
    let phi_and_grad = |x: &Array1<T>| -> (T, Array1<T>) {
        let mut grad = quad.gradient(&x.view());
        let mut phi = quad.value(&x.view());
        if rows.nrows() > 0 {
            let g = rows.dot(x) - offs;
            for t in 0..rows.nrows() / group {
                let mut sq = T::zero();
                for j in t * group..(t + 1) * group {
                    if g[j] > T::zero() {
                        sq = sq + g[j] * g[j];
                    }
                }
                let nrm = sq.sqrt();
                if nrm > T::zero() {
                    phi = phi + params.lambda * nrm;
                    for j in t * group..(t + 1) * group {
                        if g[j] > T::zero() {
                            let scale = params.lambda * g[j] / nrm;
                            grad.scaled_add(scale, &rows.row(j));
                        }
                    }
                }
            }
        }
        (phi, grad)
    };

    let mut x = set.project(&start.view())?;
    let (mut best_phi, _) = {
        let (phi, g) = phi_and_grad(&x);
        (phi, g)
    };
    let mut best = x.clone();
    let mut since_improvement = 0usize;
    for k in 1..=params.max_iters {
        let (_, grad) = phi_and_grad(&x);
        let gnorm = norm2(&grad.view());
        if gnorm <= T::of(1e-14) {
            break;
        }
        let eta = params.step0 / T::of_usize(k).sqrt() / gnorm;
        x = set.project(&(&x - &(&grad * eta)).view())?;
        let (phi, _) = phi_and_grad(&x);
        if phi < best_phi - T::of(1e-12) * (T::one() + best_phi.abs()) {
            best_phi = phi;
            best = x.clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement > params.stall_window {
                break;
            }
        }
        if !phi.is_finite() {
            return Err(CoreError::Numerical(
                "penalty objective diverged".to_string(),
            ));
        }
    }
    Ok((best, best_phi))
}

/// Attempts to solve the KKT system of the active set suggested by `x`
/// exactly. Returns a point only if multipliers are dual-feasible, the
/// point stays in the set, and the active constraints hold with equality.
fn kkt_polish<T: Real>(
    set: &DecisionSet<T>,
    quad: &QuadObjective<T>,
    rows: &ArrayView2<T>,
    offs: &ArrayView1<T>,
    x: &Array1<T>,
) -> Option<Array1<T>> {
    let dim = x.len();
    let (lo, hi) = set.coordinate_intervals();
    let scale = set.outer_radius().max(T::one());
    let mut best: Option<(T, Array1<T>)> = None;

    for thr_exp in [-8, -6, -4, -3, -2] {
        let thr = T::of(10f64.powi(thr_exp)) * scale;

        // Candidate active inequality rows, tightest first.
        let mut active_rows: Vec<usize> = (0..rows.nrows())
            .filter(|&r| (rows.row(r).dot(x) - offs[r]).abs() <= thr)
            .collect();
        active_rows.sort_by(|&a, &b| {
            let ra = (rows.row(a).dot(x) - offs[a]).abs();
            let rb = (rows.row(b).dot(x) - offs[b]).abs();
            ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal)
        });
        active_rows.truncate(dim + 2);

        // Active box faces, encoded as +/- e_j rows.
        let mut box_rows: Vec<(usize, bool)> = Vec::new();
        for j in 0..dim {
            if (x[j] - hi[j]).abs() <= thr {
                box_rows.push((j, true));
            } else if (x[j] - lo[j]).abs() <= thr {
                box_rows.push((j, false));
            }
        }

        let k = active_rows.len() + box_rows.len();
        if k > 2 * dim {
            continue;
        }
        let size = dim + k;
        let mut m = Array2::<T>::zeros((size, size));
        let mut rhs = Array1::<T>::zeros(size);
        m.slice_mut(ndarray::s![..dim, ..dim]).assign(&quad.p_mat);
        rhs.slice_mut(ndarray::s![..dim]).assign(&quad.b);
        for (idx, &r) in active_rows.iter().enumerate() {
            let at = dim + idx;
            for j in 0..dim {
                m[[j, at]] = rows[[r, j]];
                m[[at, j]] = rows[[r, j]];
            }
            rhs[at] = offs[r];
        }
        for (idx, &(coord, upper)) in box_rows.iter().enumerate() {
            let at = dim + active_rows.len() + idx;
            let sign = if upper { T::one() } else { -T::one() };
            m[[coord, at]] = sign;
            m[[at, coord]] = sign;
            rhs[at] = if upper { hi[coord] } else { -lo[coord] };
        }

        let Some(sol) = solve_dense(m.view_mut(), rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let candidate = sol.slice(ndarray::s![..dim]).to_owned();
        let multipliers = sol.slice(ndarray::s![dim..]);
        let dual_tol = -T::of(1e-8) * scale;
        if multipliers.iter().any(|&l| l < dual_tol) {
            continue;
        }
        if !set.contains(&candidate.view(), T::of(1e-9) * scale) {
            continue;
        }
        // Working-set feasibility (full-stack feasibility is re-checked by
        // the caller's scan).
        let ok = (0..rows.nrows())
            .all(|r| rows.row(r).dot(&candidate) - offs[r] <= T::of(1e-9) * scale);
        if !ok {
            continue;
        }
        let value = quad.value(&candidate.view());
        if best.as_ref().map(|(v, _)| value < *v).unwrap_or(true) {
            best = Some((value, candidate));
        }
    }
    best.map(|(_, x)| x)
}

/// Scales an infeasible point toward the origin until the stack accepts
/// it. Valid whenever the origin itself is feasible (true for the
/// generated streams, whose offsets are nonnegative).
fn repair_toward_origin<T: Real>(
    stack: &ConstraintRows<T>,
    rounds: usize,
    params: &PenaltyParams<T>,
    x: Array1<T>,
) -> Result<Array1<T>> {
    let tol = params.feasibility_tol * T::of(0.5);
    let origin = Array1::zeros(x.len());
    if stack.scan(&origin.view(), rounds, tol).0 > tol {
        return Err(CoreError::InfeasibleComparator {
            residual: stack
                .scan(&origin.view(), rounds, tol)
                .0
                .to_f64()
                .unwrap_or(f64::NAN),
            tolerance: params.feasibility_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    for _ in 0..60 {
        let mid = (lo + hi) * T::of(0.5);
        let point = &x * mid;
        if stack.scan(&point.view(), rounds, tol).0 <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(&x * lo)
}

/// Gaussian elimination with partial pivoting; `None` on singularity.
fn solve_dense<T: Real>(mut a: ArrayViewMut2<T>, mut rhs: Array1<T>) -> Option<Array1<T>> {
    let n = rhs.len();
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[[r, col]].abs() > a[[pivot, col]].abs() {
                pivot = r;
            }
        }
        if a[[pivot, col]].abs() <= T::of(1e-12) {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                let tmp = a[[col, c]];
                a[[col, c]] = a[[pivot, c]];
                a[[pivot, c]] = tmp;
            }
            rhs.swap(col, pivot);
        }
        let diag = a[[col, col]];
        for r in col + 1..n {
            let factor = a[[r, col]] / diag;
            if factor == T::zero() {
                continue;
            }
            for c in col..n {
                a[[r, c]] = a[[r, c]] - factor * a[[col, c]];
            }
            rhs[r] = rhs[r] - factor * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for c in col + 1..n {
            acc = acc - a[[col, c]] * x[c];
        }
        x[col] = acc / a[[col, col]];
    }
    Some(x)
}

/// Coarse-to-fine grid minimization of the penalized objective; the
/// independent oracle used to validate the solver at low dimension.
pub fn grid_refine<T: Real>(
    instance: &ProblemInstance<T>,
    horizon: usize,
    resolution: T,
) -> Result<(Array1<T>, T)> {
    let dim = instance.dim();
    if dim > 3 {
        return Err(CoreError::arg("dim", "grid refinement supports p <= 3"));
    }
    let params = PenaltyParams::from_instance(instance);
    let mut quad = QuadObjective::zero(dim);
    let mut stack = ConstraintRows::new(dim, instance.total_constraint_dim());
    for t in 1..=horizon {
        let (losses, constraints) = instance.round_oracles(t);
        quad.add_round(&losses);
        stack.add_round(&constraints);
    }
    let rows = stack.rows_view().to_owned();
    let offs = Array1::from_vec(stack.offsets.clone());
    let phi = |x: &Array1<T>| -> T {
        let mut v = quad.value(&x.view());
        if rows.nrows() > 0 {
            let g = rows.dot(x) - &offs;
            for t in 0..stack.rounds() {
                let mut sq = T::zero();
                for j in t * stack.group..(t + 1) * stack.group {
                    if g[j] > T::zero() {
                        sq = sq + g[j] * g[j];
                    }
                }
                v = v + params.lambda * sq.sqrt();
            }
        }
        v
    };

    let (set_lo, set_hi) = instance.set().coordinate_intervals();
    let mut lo = set_lo.clone();
    let mut hi = set_hi.clone();
    let points = 13usize;
    let mut best = Array1::zeros(dim);
    let mut best_phi = T::infinity();
    for _level in 0..14 {
        let mut idx = vec![0usize; dim];
        loop {
            let x = Array1::from_shape_fn(dim, |j| {
                lo[j] + (hi[j] - lo[j]) * T::of_usize(idx[j]) / T::of_usize(points - 1)
            });
            let v = phi(&x);
            if v < best_phi {
                best_phi = v;
                best = x;
            }
            // Odometer increment.
            let mut carry = 0;
            while carry < dim {
                idx[carry] += 1;
                if idx[carry] < points {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == dim {
                break;
            }
        }
        let mut cell = T::zero();
        for j in 0..dim {
            cell = cell.max((hi[j] - lo[j]) / T::of_usize(points - 1));
        }
        if cell <= resolution {
            break;
        }
        for j in 0..dim {
            let half = (hi[j] - lo[j]) / T::of_usize(points - 1) * T::of(1.5);
            lo[j] = (best[j] - half).max(set_lo[j]);
            hi[j] = (best[j] + half).min(set_hi[j]);
        }
    }
    Ok((best, best_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::path_length;
    use crate::problem::{AffineConstraint, QuadraticLoss};
    use crate::rng::{stream_rng, StreamPurpose};
    use ndarray::array;
    use rand::Rng;

    fn table_instance(
        half_width: f64,
        losses: Vec<Vec<QuadraticLoss<f64>>>,
        cons: Vec<Vec<AffineConstraint<f64>>>,
    ) -> ProblemInstance<f64> {
        let dim = losses[0][0].matrix().ncols();
        let set = DecisionSet::symmetric_box(half_width, dim).unwrap();
        ProblemInstance::from_tables(set, losses, cons, 0.0).unwrap()
    }

    #[test]
    fn unconstrained_minimum_is_found() {
        // f(x) = ||x||^2, g constant at -1: the minimizer is the origin.
        let sqrt2 = std::f64::consts::SQRT_2;
        let losses = vec![vec![QuadraticLoss::new(
            array![[sqrt2, 0.0], [0.0, sqrt2]],
            array![0.0, 0.0],
        )
        .unwrap()]];
        let cons = vec![vec![
            AffineConstraint::new(array![[0.0, 0.0]], array![1.0]).unwrap(),
        ]];
        let instance = table_instance(5.0, losses, cons);
        let comp = static_comparator(&instance, 1).unwrap();
        assert!(norm2(&comp.points[0].view()) < 1e-9);
        assert!(comp.objective.abs() < 1e-12);
        assert!(comp.feasibility <= 1e-6);
    }

    #[test]
    fn active_constraint_lands_on_kkt_point() {
        // p = 1: f(x) = (x - 2)^2, g(x) = x - 1 -> minimizer at 1.
        let sqrt2 = std::f64::consts::SQRT_2;
        let losses = vec![vec![QuadraticLoss::new(
            array![[sqrt2]],
            array![2.0 * sqrt2],
        )
        .unwrap()]];
        let cons = vec![vec![
            AffineConstraint::new(array![[1.0]], array![1.0]).unwrap(),
        ]];
        let instance = table_instance(5.0, losses, cons);
        let comp = static_comparator(&instance, 1).unwrap();
        assert!(
            (comp.points[0][0] - 1.0).abs() < 1e-6,
            "got {}",
            comp.points[0][0]
        );
        assert!((comp.objective - 1.0).abs() < 1e-5);
    }

    #[test]
    fn solver_matches_grid_oracle_in_2d() {
        let instance =
            crate::problem::generate_regression_stream::<f64>(2, 2, 3, 1, 6, 31).unwrap();
        let comp = static_comparator(&instance, 6).unwrap();
        let (grid_point, _) = grid_refine(&instance, 6, 1e-3).unwrap();
        let gap = norm2(&(&comp.points[0] - &grid_point).view());
        assert!(gap <= 2e-3, "solver vs grid gap {gap}");
        assert!(comp.feasibility <= 1e-6);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // g(x) = 0 x + 1 > 0 everywhere: no feasible point exists.
        let losses = vec![vec![QuadraticLoss::new(array![[1.0]], array![0.0]).unwrap()]];
        let cons = vec![vec![
            AffineConstraint::new(array![[0.0]], array![-1.0]).unwrap(),
        ]];
        let instance = table_instance(5.0, losses, cons);
        let err = static_comparator(&instance, 1);
        assert!(matches!(err, Err(CoreError::InfeasibleComparator { .. })));
    }

    #[test]
    fn dynamic_equals_static_for_time_invariant_stream() {
        let sqrt2 = std::f64::consts::SQRT_2;
        let loss = QuadraticLoss::new(array![[sqrt2, 0.0], [0.0, 1.0]], array![sqrt2, 1.0])
            .unwrap();
        let con = AffineConstraint::new(array![[1.0, 1.0]], array![10.0]).unwrap();
        let losses = vec![vec![loss]; 4];
        let cons = vec![vec![con]; 4];
        let instance = table_instance(5.0, losses, cons);
        let stat = static_comparator(&instance, 4).unwrap();
        let dynamic = dynamic_comparator(&instance, 4).unwrap();
        assert!(path_length(&dynamic) < 1e-6);
        assert!((stat.objective - dynamic.objective).abs() < 1e-6);
        for p in &dynamic.points {
            assert!(norm2(&(p - &stat.points[0]).view()) < 1e-5);
        }
    }

    #[test]
    fn dynamic_matches_normal_equations_when_inactive() {
        // Strongly convex per-round losses with far-away constraints: the
        // dynamic comparator is the per-round least-squares solution.
        let mut rng = stream_rng(9, StreamPurpose::Direction, 0, 0);
        let rounds = 5;
        let mut losses = Vec::new();
        let mut cons = Vec::new();
        for _ in 0..rounds {
            let h = Array2::from_shape_fn((3, 2), |_| rng.random_range(-1.0..=1.0));
            let z = Array1::from_shape_fn(3, |_| rng.random_range(-0.5..=0.5));
            losses.push(vec![QuadraticLoss::new(h, z).unwrap()]);
            cons.push(vec![
                AffineConstraint::new(array![[1.0, 0.0]], array![50.0]).unwrap(),
            ]);
        }
        let set = DecisionSet::symmetric_box(50.0, 2).unwrap();
        let instance = ProblemInstance::from_tables(set, losses.clone(), cons, 0.0).unwrap();
        let dynamic = dynamic_comparator(&instance, rounds).unwrap();
        for (t, point) in dynamic.points.iter().enumerate() {
            let h = losses[t][0].matrix();
            let z = losses[t][0].target();
            let mut normal = h.t().dot(h);
            let rhs = h.t().dot(z);
            let want = solve_dense(normal.view_mut(), rhs).unwrap();
            assert!(
                norm2(&(point - &want).view()) < 1e-5,
                "round {t}: {point} vs {want}"
            );
        }
        assert!(dynamic.feasibility <= 1e-6);
    }

    #[test]
    fn dynamic_objective_never_exceeds_static() {
        let instance =
            crate::problem::generate_regression_stream::<f64>(2, 2, 2, 1, 8, 77).unwrap();
        let stat = static_comparator(&instance, 8).unwrap();
        let dynamic = dynamic_comparator(&instance, 8).unwrap();
        assert!(dynamic.objective <= stat.objective + 1e-7);
    }

    #[test]
    fn workspace_matches_one_shot_solves() {
        let instance =
            crate::problem::generate_regression_stream::<f64>(3, 2, 2, 2, 12, 5).unwrap();
        let mut ws = ComparatorWorkspace::new(&instance, true);
        for checkpoint in [4usize, 8, 12] {
            ws.extend_to(&instance, checkpoint).unwrap();
            let sol = ws.static_solution().unwrap();
            let oneshot = static_comparator(&instance, checkpoint).unwrap();
            assert!(
                (sol.objective - oneshot.objective).abs()
                    <= 1e-6 * (1.0 + oneshot.objective.abs()),
                "objective mismatch at {checkpoint}: {} vs {}",
                sol.objective,
                oneshot.objective
            );
        }
        let summary = ws.dynamic_summary().unwrap();
        let dynamic = dynamic_comparator(&instance, 12).unwrap();
        assert!((summary.cumulative_objective - dynamic.objective).abs() < 1e-6);
        assert!((summary.path_length - path_length(&dynamic)).abs() < 1e-6);
    }

    #[test]
    fn solve_dense_small_system() {
        let mut a: Array2<f64> = array![[2.0, 1.0], [1.0, 3.0]];
        let x = solve_dense(a.view_mut(), array![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);

        let mut singular = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(solve_dense(singular.view_mut(), array![1.0, 2.0]).is_none());
    }
}
