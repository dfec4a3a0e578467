//! Problem instances, supergraphs and exact value oracles.
//!
//! States are 0-based throughout.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, DenseMatrix};

/// Absolute tolerance on row sums of a transition matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Side-information graph whose edge set contains the support of `Q`.
///
/// `A(s, s') = 1` exactly when `s'` appears in `out_edges[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Supergraph {
    out_edges: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
    avg_degree: f64,
}

impl Supergraph {
    /// Builds the graph from out-edge lists; lists are sorted and deduplicated.
    pub fn from_out_edges(states: usize, mut out_edges: Vec<Vec<usize>>) -> Result<Self> {
        if out_edges.len() != states {
            return Err(Error::DimensionMismatch(format!(
                "{} out-edge lists for {states} states",
                out_edges.len()
            )));
        }
        let mut in_neighbors = vec![Vec::new(); states];
        for (s, row) in out_edges.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &t in row.iter() {
                if t >= states {
                    return Err(Error::InvalidState { state: t, states });
                }
                // s ascends, so each in-list comes out sorted.
                in_neighbors[t].push(s);
            }
        }
        let edges: usize = out_edges.iter().map(Vec::len).sum();
        let avg_degree = if states == 0 { 0.0 } else { edges as f64 / states as f64 };
        Ok(Self {
            out_edges,
            in_neighbors,
            avg_degree,
        })
    }

    /// Every pair is an edge.
    pub fn complete(states: usize) -> Self {
        let all: Vec<usize> = (0..states).collect();
        Self::from_out_edges(states, vec![all; states]).expect("complete graph is well formed")
    }

    /// The tightest legal supergraph: the support of `q`.
    pub fn from_support(q: &DenseMatrix) -> Self {
        let out = (0..q.rows())
            .map(|s| (0..q.cols()).filter(|&t| q.get(s, t) != 0.0).collect())
            .collect();
        Self::from_out_edges(q.rows(), out).expect("support lists are in range")
    }

    pub fn states(&self) -> usize {
        self.out_edges.len()
    }

    pub fn out_edges(&self) -> &[Vec<usize>] {
        &self.out_edges
    }

    /// `N_in(s)`: states with an edge into `s`, sorted.
    pub fn in_neighbors(&self, s: usize) -> &[usize] {
        &self.in_neighbors[s]
    }

    pub fn all_in_neighbors(&self) -> &[Vec<usize>] {
        &self.in_neighbors
    }

    pub fn in_degree(&self, s: usize) -> usize {
        self.in_neighbors[s].len()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        self.in_neighbors.iter().map(Vec::len).collect()
    }

    /// `d̄`, the mean in-degree.
    pub fn avg_degree(&self) -> f64 {
        self.avg_degree
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.out_edges[s].binary_search(&t).is_ok()
    }
}

/// A broken instance invariant, named with the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AlphaOutOfRange {
        alpha: f64,
    },
    NegativeCost {
        state: usize,
        value: f64,
    },
    NegativeTransition {
        row: usize,
        col: usize,
        value: f64,
    },
    RowSum {
        row: usize,
        sum: f64,
    },
    /// `A(row, col) = 0` but `Q(row, col) > 0`.
    AbsoluteContinuity {
        row: usize,
        col: usize,
        value: f64,
    },
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::AlphaOutOfRange { alpha } => write!(f, "discount {alpha} outside (0,1)"),
            Self::NegativeCost { state, value } => {
                write!(
                    f,
                    "cost at state {state} is {value}, must be a finite nonnegative value"
                )
            }
            Self::NegativeTransition { row, col, value } => {
                write!(f, "Q({row},{col}) = {value}, must be a finite nonnegative value")
            }
            Self::RowSum { row, sum } => write!(f, "row {row} of Q sums to {sum}, not 1"),
            Self::AbsoluteContinuity { row, col, value } => {
                write!(
                    f,
                    "Q({row},{col}) = {value} but the supergraph has no edge ({row},{col})"
                )
            }
        }
    }
}

/// A discounted Markov chain with known costs and a supergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    alpha: f64,
    cost: Vec<f64>,
    q: DenseMatrix,
    supergraph: Supergraph,
}

impl ProblemInstance {
    /// Checks shapes only; numeric invariants are left to [`validate`](Self::validate).
    pub fn from_parts(alpha: f64, cost: Vec<f64>, q: DenseMatrix, supergraph: Supergraph) -> Result<Self> {
        let s = cost.len();
        if s == 0 {
            return Err(invalid("an instance needs at least one state"));
        }
        if q.rows() != s || q.cols() != s {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{} but there are {s} costs",
                q.rows(),
                q.cols()
            )));
        }
        if supergraph.states() != s {
            return Err(Error::DimensionMismatch(format!(
                "supergraph has {} states, expected {s}",
                supergraph.states()
            )));
        }
        Ok(Self {
            alpha,
            cost,
            q,
            supergraph,
        })
    }

    /// Shape checks plus every numeric invariant.
    pub fn new(alpha: f64, cost: Vec<f64>, q: DenseMatrix, supergraph: Supergraph) -> Result<Self> {
        let instance = Self::from_parts(alpha, cost, q, supergraph)?;
        if let Some(v) = instance.validate().first() {
            return Err(Error::InvalidInstance(format!("{v}")));
        }
        Ok(instance)
    }

    /// All invariant violations; empty iff the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(Violation::AlphaOutOfRange { alpha: self.alpha });
        }
        for (state, &value) in self.cost.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                out.push(Violation::NegativeCost { state, value });
            }
        }
        for row in 0..self.states() {
            let mut sum = 0.0;
            for (col, &value) in self.q.row(row).iter().enumerate() {
                if !(value >= 0.0 && value.is_finite()) {
                    out.push(Violation::NegativeTransition { row, col, value });
                }
                if value != 0.0 && !self.supergraph.has_edge(row, col) {
                    out.push(Violation::AbsoluteContinuity { row, col, value });
                }
                sum += value;
            }
            if !(libm::fabs(sum - 1.0) <= ROW_SUM_TOLERANCE) {
                out.push(Violation::RowSum { row, sum });
            }
        }
        out
    }

    pub fn states(&self) -> usize {
        self.cost.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn supergraph(&self) -> &Supergraph {
        &self.supergraph
    }

    pub fn cost_inf(&self) -> f64 {
        linalg::norm_inf(&self.cost)
    }

    pub fn cost_l1(&self) -> f64 {
        linalg::norm_1(&self.cost)
    }

    /// Smallest positive entry of `Q`.
    pub fn q_min(&self) -> f64 {
        (0..self.states())
            .flat_map(|s| self.q.row(s).iter().copied())
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Same chain and supergraph with a different cost vector.
    pub fn with_cost(&self, cost: Vec<f64>) -> Result<Self> {
        Self::new(self.alpha, cost, self.q.clone(), self.supergraph.clone())
    }

    /// `v = (1-α)(I-αQ)⁻¹c` by a dense LU solve.
    pub fn exact_value(&self) -> Vec<f64> {
        // I - αQ is strictly diagonally dominant for α < 1 and stochastic Q.
        linalg::value_function(&self.q, &self.cost, self.alpha).expect("I - αQ is nonsingular")
    }

    /// `(1-α) Σ_{t<T} α^t Q^t c`, the value truncated at horizon `horizon`.
    pub fn exact_value_power_series(&self, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(invalid("power series horizon must be at least 1"));
        }
        let mut term = self.cost.clone();
        let mut acc = vec![0.0; self.states()];
        let mut weight = 1.0 - self.alpha;
        for t in 0..horizon {
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
            if t + 1 < horizon {
                term = self.q.mul_vec(&term);
                weight *= self.alpha;
            }
        }
        Ok(acc)
    }
}
