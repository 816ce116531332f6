//! Time-varying communication graphs and consensus mixing.
//!
//! Mixing matrices are doubly stochastic with uniformly bounded positive
//! entries and positive diagonals; over any window of `B` consecutive
//! rounds the union graph must be strongly connected. Those three
//! properties drive the geometric mixing rate `tau * lambda^(t-s)`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::{stream_rng, StreamPurpose};
use crate::scalar::Real;

/// Doubly stochastic consensus weights for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T> {
    weights: Array2<T>,
    min_positive: T,
}

/// Residual tolerance for the doubly-stochastic check.
const STOCHASTIC_TOL: f64 = 1e-12;

impl<T: Real> MixingMatrix<T> {
    /// Validates and wraps a weight matrix. `min_positive` is the uniform
    /// lower bound `w` that every positive entry must meet.
    pub fn new(weights: Array2<T>, min_positive: T) -> Result<Self> {
        if weights.nrows() != weights.ncols() || weights.is_empty() {
            return Err(CoreError::InvalidMixing("matrix must be square".into()));
        }
        if !(min_positive > T::zero() && min_positive < T::one()) {
            return Err(CoreError::InvalidMixing(
                "positive-entry bound must lie in (0, 1)".into(),
            ));
        }
        let n = weights.nrows();
        let tol = T::of(STOCHASTIC_TOL);
        for i in 0..n {
            if weights[[i, i]] <= T::zero() {
                return Err(CoreError::InvalidMixing(format!(
                    "diagonal entry {i} must be positive"
                )));
            }
        }
        for (idx, &v) in weights.indexed_iter() {
            if v < T::zero() {
                return Err(CoreError::InvalidMixing(format!(
                    "negative weight at {idx:?}"
                )));
            }
            if v > T::zero() && v < min_positive {
                return Err(CoreError::InvalidMixing(format!(
                    "positive weight at {idx:?} below bound {min_positive}"
                )));
            }
        }
        for i in 0..n {
            let row: T = weights.row(i).iter().fold(T::zero(), |a, &v| a + v);
            let col: T = weights.column(i).iter().fold(T::zero(), |a, &v| a + v);
            if (row - T::one()).abs() > tol || (col - T::one()).abs() > tol {
                return Err(CoreError::InvalidMixing(format!(
                    "row/column {i} sums deviate from 1 beyond {STOCHASTIC_TOL}"
                )));
            }
        }
        Ok(Self {
            weights,
            min_positive,
        })
    }

    /// The 1x1 identity for single-agent runs.
    pub fn singleton() -> Self {
        Self {
            weights: Array2::from_elem((1, 1), T::one()),
            min_positive: T::of(0.5),
        }
    }

    /// Builds the weight rule of the benchmark from an undirected edge
    /// list: off-diagonal `1/n` per edge, diagonal `(n - deg)/n`.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::arg("n", "need at least two agents"));
        }
        let nt = T::of_usize(n);
        let w = T::one() / nt;
        let mut weights = Array2::zeros((n, n));
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(CoreError::arg("edges", format!("bad edge ({i}, {j})")));
            }
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
        for i in 0..n {
            let degree = (0..n).filter(|&j| j != i && weights[[i, j]] > T::zero()).count();
            // (n - deg)/n >= 1/n since deg <= n - 1.
            weights[[i, i]] = T::of_usize(n - degree) / nt;
        }
        Self::new(weights, w)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, T> {
        self.weights.view()
    }

    pub fn min_positive(&self) -> T {
        self.min_positive
    }

    /// In-neighbors of `i`: agents `j` with `[W]_{ij} > 0`, including `i`.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&j| self.weights[[i, j]] > T::zero())
            .collect()
    }
}

/// One round of consensus: row `i` of the output is
/// `sum_j [W]_{ij} x_j`. Dimension-checked.
pub fn mix_states<T: Real>(w: &MixingMatrix<T>, states: &ArrayView2<T>) -> Result<Array2<T>> {
    if states.nrows() != w.n() {
        return Err(CoreError::dim("mix_states", w.n(), states.nrows()));
    }
    let mut out = Array2::zeros(states.raw_dim());
    for i in 0..w.n() {
        let mut row = out.row_mut(i);
        for j in 0..w.n() {
            let wij = w.weights[[i, j]];
            if wij > T::zero() {
                row.scaled_add(wij, &states.row(j));
            }
        }
    }
    Ok(out)
}

/// Mixing constants of a `B`-strongly-connected sequence with positive
/// entries bounded below by `w`:
/// `tau = (1 - w/(4 n^2))^(-2)` and `lambda = (1 - w/(4 n^2))^(1/B)`.
pub fn mixing_constants<T: Real>(w: T, n: usize, window: usize) -> Result<(T, T)> {
    if !(w > T::zero() && w < T::one()) {
        return Err(CoreError::arg("w", "must lie in (0, 1)"));
    }
    if n < 1 || window < 1 {
        return Err(CoreError::arg("n/B", "must be at least 1"));
    }
    let base = T::one() - w / (T::of(4.0) * T::of_usize(n) * T::of_usize(n));
    let tau = base.powf(T::of(-2.0));
    let lambda = base.powf(T::one() / T::of_usize(window));
    Ok((tau, lambda))
}

/// A stored sequence of mixing matrices with its connectivity window.
#[derive(Debug, Clone)]
pub struct GraphSequence<T> {
    matrices: Vec<MixingMatrix<T>>,
    window: usize,
    tau: T,
    lambda: T,
}

impl<T: Real> GraphSequence<T> {
    pub fn new(matrices: Vec<MixingMatrix<T>>, window: usize) -> Result<Self> {
        if matrices.is_empty() {
            return Err(CoreError::arg("matrices", "sequence must be nonempty"));
        }
        if window == 0 {
            return Err(CoreError::arg("window", "must be at least 1"));
        }
        let n = matrices[0].n();
        if matrices.iter().any(|m| m.n() != n) {
            return Err(CoreError::InvalidMixing(
                "all matrices must share one size".into(),
            ));
        }
        let w = matrices
            .iter()
            .map(|m| m.min_positive())
            .fold(T::infinity(), T::min);
        let (tau, lambda) = mixing_constants(w, n, window)?;
        Ok(Self {
            matrices,
            window,
            tau,
            lambda,
        })
    }

    pub fn matrices(&self) -> &[MixingMatrix<T>] {
        &self.matrices
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}

/// Outcome of validating one sequence against its structural contract.
#[derive(Debug, Clone)]
pub struct ValidationReport<T> {
    /// Worst absolute row/column sum deviation from 1.
    pub stochastic_residual: T,
    /// Smallest positive entry across the sequence.
    pub min_positive_entry: T,
    /// The bound the entries are checked against.
    pub entry_bound: T,
    /// For each window start (0-based), whether the union graph is
    /// strongly connected.
    pub window_connectivity: Vec<(usize, bool)>,
    pub pass: bool,
}

impl<T: Real> std::fmt::Display for ValidationReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "stochastic residual: {:e}", self.stochastic_residual)?;
        writeln!(
            f,
            "min positive entry:  {} (bound {})",
            self.min_positive_entry, self.entry_bound
        )?;
        let bad: Vec<usize> = self
            .window_connectivity
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(s, _)| *s)
            .collect();
        if bad.is_empty() {
            writeln!(f, "all {} windows strongly connected", self.window_connectivity.len())?;
        } else {
            writeln!(f, "disconnected windows at starts {bad:?}")?;
        }
        write!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Checks double stochasticity, the positive-entry bound, and strong
/// connectivity of every `B`-round union graph.
pub fn validate_mixing_sequence<T: Real>(seq: &GraphSequence<T>) -> ValidationReport<T> {
    let n = seq.matrices[0].n();
    let mut residual = T::zero();
    let mut min_pos = T::infinity();
    for m in &seq.matrices {
        for i in 0..n {
            let row: T = m.weights.row(i).iter().fold(T::zero(), |a, &v| a + v);
            let col: T = m.weights.column(i).iter().fold(T::zero(), |a, &v| a + v);
            residual = residual.max((row - T::one()).abs()).max((col - T::one()).abs());
        }
        for &v in m.weights.iter() {
            if v > T::zero() {
                min_pos = min_pos.min(v);
            }
        }
    }
    let bound = seq
        .matrices
        .iter()
        .map(|m| m.min_positive())
        .fold(T::infinity(), T::min);

    let len = seq.matrices.len();
    let span = seq.window.min(len);
    let starts = len - span + 1;
    let mut window_connectivity = Vec::with_capacity(starts);
    for s in 0..starts {
        let mut union = vec![vec![false; n]; n];
        for m in &seq.matrices[s..s + span] {
            for ((i, j), &v) in m.weights.indexed_iter() {
                if i != j && v > T::zero() {
                    // (j, i) in the edge set means i receives from j.
                    union[j][i] = true;
                }
            }
        }
        window_connectivity.push((s, strongly_connected(&union)));
    }

    let pass = residual <= T::of(STOCHASTIC_TOL)
        && min_pos >= bound
        && window_connectivity.iter().all(|(_, ok)| *ok);
    ValidationReport {
        stochastic_residual: residual,
        min_positive_entry: min_pos,
        entry_bound: bound,
        window_connectivity,
        pass,
    }
}

/// Reachability from node 0 on the graph and its transpose.
fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let reach = |transpose: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if transpose { adj[v][u] } else { adj[u][v] };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(false) && reach(true)
}

/// One round of the benchmark graph process: every undirected pair is
/// connected with probability `rho`, the path edges `(i, i+1)` are always
/// present, and weights follow the `1/n` rule.
pub fn generate_er_path_mixing<T: Real>(
    n: usize,
    rho: f64,
    round: usize,
    seed: u64,
) -> Result<MixingMatrix<T>> {
    if n < 2 {
        return Err(CoreError::arg("n", "need at least two agents"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(CoreError::arg("rho", "must lie in [0, 1]"));
    }
    let mut rng = stream_rng(seed, StreamPurpose::Graph, 0, round);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let draw: f64 = rng.random();
            if j == i + 1 || draw < rho {
                edges.push((i, j));
            }
        }
    }
    MixingMatrix::from_undirected_edges(n, &edges)
}
