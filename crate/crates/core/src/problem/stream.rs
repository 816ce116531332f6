//! Problem instances: the randomized regression benchmark stream and
//! explicit oracle tables for hand-built cases.
//!
//! Instances are never persisted; every oracle is regenerated on demand
//! from counter-keyed streams, so reading round `t` does not depend on
//! which rounds were read before it.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::problem::{
    AffineConstraint, ConstraintFunction, DecisionSet, LossFunction, ProblemConstants,
    QuadraticLoss,
};
use crate::rng::{stream_rng, StreamPurpose};
use crate::scalar::Real;

/// Sizes and seed of a generated regression stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig<T> {
    /// Number of agents `n`.
    pub agents: usize,
    /// Decision dimension `p`.
    pub dim: usize,
    /// Regression rows per agent `d_i` (uniform).
    pub samples: usize,
    /// Constraint rows per agent `m_i` (uniform).
    pub constraints_per_agent: usize,
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Master seed.
    pub seed: u64,
    /// Half-width of the box decision set.
    pub half_width: T,
    /// Ridge coefficient; positive values make every loss strongly convex.
    pub ridge: T,
}

impl<T: Real> StreamConfig<T> {
    pub fn new(
        agents: usize,
        dim: usize,
        samples: usize,
        constraints_per_agent: usize,
        horizon: usize,
        seed: u64,
    ) -> Self {
        Self {
            agents,
            dim,
            samples,
            constraints_per_agent,
            horizon,
            seed,
            half_width: T::of(5.0),
            ridge: T::zero(),
        }
    }

    pub fn with_ridge(mut self, ridge: T) -> Self {
        self.ridge = ridge;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("agents", self.agents),
            ("dim", self.dim),
            ("samples", self.samples),
            ("constraints_per_agent", self.constraints_per_agent),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(CoreError::arg(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Source<T> {
    /// Lazily regenerated regression stream. `centralized` folds all
    /// agents into one whose loss is the global average and whose
    /// constraint is the full stack.
    Regression {
        cfg: StreamConfig<T>,
        centralized: bool,
    },
    /// Explicit `[round][agent]` oracle tables.
    Table {
        losses: Vec<Vec<QuadraticLoss<T>>>,
        constraints: Vec<Vec<AffineConstraint<T>>>,
    },
}

/// A full problem instance: decision set, per-round oracles for every
/// agent, and the uniform bound constants of the stream.
#[derive(Debug, Clone)]
pub struct ProblemInstance<T> {
    n: usize,
    dim: usize,
    m_per_agent: Vec<usize>,
    horizon: usize,
    set: DecisionSet<T>,
    constants: ProblemConstants<T>,
    source: Source<T>,
}

/// Generates the benchmark stream: `H` entries uniform on `[-1, 1]`,
/// `z = H 1 + eps` with standard normal noise, `A` entries uniform on
/// `[0, 2]`, `a` entries uniform on `[0, 1]`, over the box `[-5, 5]^p`.
pub fn generate_regression_stream<T: Real>(
    agents: usize,
    dim: usize,
    samples: usize,
    constraints_per_agent: usize,
    horizon: usize,
    seed: u64,
) -> Result<ProblemInstance<T>> {
    ProblemInstance::regression(StreamConfig::new(
        agents,
        dim,
        samples,
        constraints_per_agent,
        horizon,
        seed,
    ))
}

impl<T: Real> ProblemInstance<T> {
    pub fn regression(cfg: StreamConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let set = DecisionSet::symmetric_box(cfg.half_width, cfg.dim)?;
        let mut instance = Self {
            n: cfg.agents,
            dim: cfg.dim,
            m_per_agent: vec![cfg.constraints_per_agent; cfg.agents],
            horizon: cfg.horizon,
            set,
            constants: ProblemConstants {
                f1: T::zero(),
                f2: T::zero(),
                mu: cfg.ridge,
                inner_radius: T::zero(),
                outer_radius: T::zero(),
            },
            source: Source::Regression {
                cfg,
                centralized: false,
            },
        };
        instance.constants = instance.scan_constants()?;
        Ok(instance)
    }

    /// Builds an instance from explicit `[round][agent]` oracle tables.
    pub fn from_tables(
        set: DecisionSet<T>,
        losses: Vec<Vec<QuadraticLoss<T>>>,
        constraints: Vec<Vec<AffineConstraint<T>>>,
        mu: T,
    ) -> Result<Self> {
        if losses.is_empty() || losses.len() != constraints.len() {
            return Err(CoreError::dim(
                "oracle tables",
                losses.len(),
                constraints.len(),
            ));
        }
        let n = losses[0].len();
        if n == 0 || constraints[0].len() != n {
            return Err(CoreError::arg("tables", "need at least one agent"));
        }
        let m_per_agent: Vec<usize> = constraints[0].iter().map(|c| c.dim()).collect();
        let mut instance = Self {
            n,
            dim: set.dim(),
            m_per_agent,
            horizon: losses.len(),
            set,
            constants: ProblemConstants {
                f1: T::zero(),
                f2: T::zero(),
                mu,
                inner_radius: T::zero(),
                outer_radius: T::zero(),
            },
            source: Source::Table {
                losses,
                constraints,
            },
        };
        instance.constants = instance.scan_constants()?;
        Ok(instance)
    }

    /// The one-agent reduction holding the global loss (the average of
    /// all local losses) and the full constraint stack.
    pub fn centralize(&self) -> Result<Self> {
        let m_total = self.total_constraint_dim();
        let mut reduced = self.clone();
        reduced.n = 1;
        reduced.m_per_agent = vec![m_total];
        reduced.source = match &self.source {
            Source::Regression { cfg, .. } => Source::Regression {
                cfg: cfg.clone(),
                centralized: true,
            },
            Source::Table {
                losses,
                constraints,
            } => {
                let scale = T::one() / T::of_usize(self.n).sqrt();
                let stacked_losses: Result<Vec<Vec<QuadraticLoss<T>>>> = losses
                    .iter()
                    .map(|row| {
                        let ridge = row[0].ridge();
                        let (h, z) = stack_scaled(
                            row.iter().map(|l| (l.matrix(), l.target())),
                            scale,
                        );
                        Ok(vec![QuadraticLoss::with_ridge(h, z, ridge)?])
                    })
                    .collect();
                let stacked_cons: Result<Vec<Vec<AffineConstraint<T>>>> = constraints
                    .iter()
                    .map(|row| {
                        let (a, off) = stack_scaled(
                            row.iter().map(|c| (c.matrix(), c.offset())),
                            T::one(),
                        );
                        Ok(vec![AffineConstraint::new(a, off)?])
                    })
                    .collect();
                Source::Table {
                    losses: stacked_losses?,
                    constraints: stacked_cons?,
                }
            }
        };
        reduced.constants = reduced.scan_constants()?;
        Ok(reduced)
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn set(&self) -> &DecisionSet<T> {
        &self.set
    }

    pub fn constants(&self) -> &ProblemConstants<T> {
        &self.constants
    }

    pub fn constraint_dims(&self) -> &[usize] {
        &self.m_per_agent
    }

    /// Total stacked constraint dimension `m`.
    pub fn total_constraint_dim(&self) -> usize {
        self.m_per_agent.iter().sum()
    }

    /// Loss oracle of agent `i` at round `t` (1-based).
    pub fn loss(&self, agent: usize, round: usize) -> QuadraticLoss<T> {
        self.check_access(agent, round);
        match &self.source {
            Source::Regression { cfg, centralized } => {
                if *centralized {
                    let scale = T::one() / T::of_usize(cfg.agents).sqrt();
                    let parts: Vec<QuadraticLoss<T>> = (0..cfg.agents)
                        .map(|i| make_loss(cfg, i, round))
                        .collect();
                    let (h, z) = stack_scaled(
                        parts.iter().map(|l| (l.matrix(), l.target())),
                        scale,
                    );
                    QuadraticLoss::with_ridge(h, z, cfg.ridge).expect("stacked dims agree")
                } else {
                    make_loss(cfg, agent, round)
                }
            }
            Source::Table { losses, .. } => losses[round - 1][agent].clone(),
        }
    }

    /// Constraint oracle of agent `i` at round `t` (1-based).
    pub fn constraint(&self, agent: usize, round: usize) -> AffineConstraint<T> {
        self.check_access(agent, round);
        match &self.source {
            Source::Regression { cfg, centralized } => {
                if *centralized {
                    let parts: Vec<AffineConstraint<T>> = (0..cfg.agents)
                        .map(|i| make_constraint(cfg, i, round))
                        .collect();
                    let (a, off) = stack_scaled(
                        parts.iter().map(|c| (c.matrix(), c.offset())),
                        T::one(),
                    );
                    AffineConstraint::new(a, off).expect("stacked dims agree")
                } else {
                    make_constraint(cfg, agent, round)
                }
            }
            Source::Table { constraints, .. } => constraints[round - 1][agent].clone(),
        }
    }

    /// All oracles of one round, in agent order.
    pub fn round_oracles(&self, round: usize) -> (Vec<QuadraticLoss<T>>, Vec<AffineConstraint<T>>) {
        let losses = (0..self.n).map(|i| self.loss(i, round)).collect();
        let constraints = (0..self.n).map(|i| self.constraint(i, round)).collect();
        (losses, constraints)
    }

    /// Global loss `f_t(x) = (1/n) sum_j f_{j,t}(x)` evaluated from a
    /// round's oracle row.
    pub fn global_loss(losses: &[QuadraticLoss<T>], x: &ArrayView1<T>) -> T {
        let n = T::of_usize(losses.len());
        losses
            .iter()
            .fold(T::zero(), |acc, l| acc + l.value(x))
            / n
    }

    /// Stacked global constraint `g_t(x) = col(g_{1,t}(x), ..., g_{n,t}(x))`.
    pub fn global_constraint(constraints: &[AffineConstraint<T>], x: &ArrayView1<T>) -> Array1<T> {
        let m: usize = constraints.iter().map(|c| c.dim()).sum();
        let mut out = Array1::zeros(m);
        let mut at = 0;
        for c in constraints {
            out.slice_mut(ndarray::s![at..at + c.dim()])
                .assign(&c.value(x));
            at += c.dim();
        }
        out
    }

    /// Streams all oracles once, maximizing the uniform bounds. Also
    /// asserts that the origin is feasible for generated streams (the
    /// offsets are nonnegative by construction).
    fn scan_constants(&self) -> Result<ProblemConstants<T>> {
        let mut f1 = T::zero();
        let mut f2 = T::zero();
        let origin = Array1::<T>::zeros(self.dim);
        let generated = matches!(
            self.source,
            Source::Regression { .. }
        );
        for t in 1..=self.horizon {
            for i in 0..self.n {
                let loss = self.loss(i, t);
                let cons = self.constraint(i, t);
                f1 = f1
                    .max(loss.value_range_bound(&self.set))
                    .max(cons.value_norm_bound(&self.set));
                f2 = f2
                    .max(loss.gradient_norm_bound(&self.set))
                    .max(cons.jacobian_norm_bound());
                if generated && cons.value(&origin.view()).iter().any(|&v| v > T::zero()) {
                    return Err(CoreError::Numerical(
                        "generated stream must keep the origin feasible".to_string(),
                    ));
                }
            }
        }
        let constants = ProblemConstants {
            f1,
            f2,
            mu: self.constants.mu,
            inner_radius: self.set.inner_radius(),
            outer_radius: self.set.outer_radius(),
        };
        constants.validate()?;
        Ok(constants)
    }

    fn check_access(&self, agent: usize, round: usize) {
        assert!(agent < self.n, "agent {agent} out of range (n = {})", self.n);
        assert!(
            round >= 1 && round <= self.horizon,
            "round {round} outside 1..={}",
            self.horizon
        );
    }

    /// Debug dump of the raw stream data as CSV rows
    /// `round,agent,matrix,row,col,value`.
    pub fn dump_csv(&self, out: &mut impl Write, rounds: DumpFilter) -> std::io::Result<()> {
        writeln!(out, "round,agent,matrix,row,col,value")?;
        let (from, to) = match rounds {
            DumpFilter::All => (1, self.horizon),
            DumpFilter::Range(a, b) => (a.max(1), b.min(self.horizon)),
        };
        for t in from..=to {
            for i in 0..self.n {
                let loss = self.loss(i, t);
                for ((r, c), v) in loss.matrix().indexed_iter() {
                    writeln!(out, "{t},{i},H,{r},{c},{v}")?;
                }
                for (r, v) in loss.target().iter().enumerate() {
                    writeln!(out, "{t},{i},z,{r},0,{v}")?;
                }
                let cons = self.constraint(i, t);
                for ((r, c), v) in cons.matrix().indexed_iter() {
                    writeln!(out, "{t},{i},A,{r},{c},{v}")?;
                }
                for (r, v) in cons.offset().iter().enumerate() {
                    writeln!(out, "{t},{i},a,{r},0,{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Round selection for debug dumps.
#[derive(Debug, Clone, Copy)]
pub enum DumpFilter {
    All,
    /// Inclusive 1-based round range.
    Range(usize, usize),
}

fn make_loss<T: Real>(cfg: &StreamConfig<T>, agent: usize, round: usize) -> QuadraticLoss<T> {
    let mut rng = stream_rng(cfg.seed, StreamPurpose::LossMatrix, agent, round);
    let h = Array2::from_shape_fn((cfg.samples, cfg.dim), |_| {
        T::of(rng.random_range(-1.0..=1.0))
    });
    let mut noise_rng = stream_rng(cfg.seed, StreamPurpose::LossNoise, agent, round);
    let ones = Array1::from_elem(cfg.dim, T::one());
    let z = h.dot(&ones)
        + &Array1::from_shape_fn(cfg.samples, |_| {
            T::of(noise_rng.sample::<f64, _>(StandardNormal))
        });
    QuadraticLoss::with_ridge(h, z, cfg.ridge).expect("generator dims agree")
}

fn make_constraint<T: Real>(
    cfg: &StreamConfig<T>,
    agent: usize,
    round: usize,
) -> AffineConstraint<T> {
    let mut mat_rng = stream_rng(cfg.seed, StreamPurpose::ConstraintMatrix, agent, round);
    let a = Array2::from_shape_fn((cfg.constraints_per_agent, cfg.dim), |_| {
        T::of(mat_rng.random_range(0.0..=2.0))
    });
    let mut off_rng = stream_rng(cfg.seed, StreamPurpose::ConstraintOffset, agent, round);
    let offset = Array1::from_shape_fn(cfg.constraints_per_agent, |_| {
        T::of(off_rng.random_range(0.0..=1.0))
    });
    AffineConstraint::new(a, offset).expect("generator dims agree")
}

/// Vertically stacks `(matrix, vector)` pairs, scaling both by `scale`.
fn stack_scaled<'a, T: Real>(
    parts: impl Iterator<Item = (&'a Array2<T>, &'a Array1<T>)>,
    scale: T,
) -> (Array2<T>, Array1<T>) {
    let mut rows = Vec::new();
    let mut vec_entries = Vec::new();
    let mut cols = 0;
    for (m, v) in parts {
        cols = m.ncols();
        for row in m.rows() {
            rows.extend(row.iter().map(|&x| x * scale));
        }
        vec_entries.extend(v.iter().map(|&x| x * scale));
    }
    let nrows = vec_entries.len();
    (
        Array2::from_shape_vec((nrows, cols), rows).expect("consistent row lengths"),
        Array1::from_vec(vec_entries),
    )
}
