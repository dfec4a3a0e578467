//! Random problem ensembles.
//!
//! `Q` is a Uniform(0,1] matrix masked elementwise by independent
//! Bernoulli(p/S) entries and normalized row by row; the mask is redrawn
//! until no row is empty, and the supergraph is the mask itself. Costs are
//! either the mixed model `c = c1 + c2` (`c1` Bernoulli(p/S), redrawn until
//! nonzero, `c2` Uniform[0, p/S]) or a uniformly random binary vector with
//! exactly `H` ones.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{ProblemInstance, Supergraph};
use crate::streams::{self, Stream};

/// Attempts allowed for each rejection loop before giving up.
pub const RESAMPLE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// `c1 + c2`, so `E‖c‖_1 ≈ 3p/2` and `‖c‖_∞ ∈ [1, 2]`.
    Mixed,
    /// Exactly `ones` unit entries at uniformly random positions.
    Binary { ones: usize },
}

/// How the density parameter grows with `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseRule {
    /// `p` fixed.
    Constant(f64),
    /// `p = (100 S)^{1/4}`.
    FourthRoot,
    /// `p = √S`.
    SquareRoot,
}

impl CaseRule {
    pub fn density(&self, states: usize) -> f64 {
        let s = states as f64;
        match *self {
            Self::Constant(p) => p,
            Self::FourthRoot => libm::pow(100.0 * s, 0.25),
            Self::SquareRoot => libm::sqrt(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub states: usize,
    /// Expected average degree; edge and high-cost probability is `p/S`.
    pub p: f64,
    pub cost_model: CostModel,
}

impl EnsembleSpec {
    pub fn new(states: usize, p: f64, cost_model: CostModel) -> Result<Self> {
        let spec = Self { states, p, cost_model };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_case(states: usize, rule: CaseRule, cost_model: CostModel) -> Result<Self> {
        Self::new(states, rule.density(states), cost_model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(invalid("S must be at least 1"));
        }
        if !(self.p >= 1.0 && self.p <= self.states as f64) {
            return Err(invalid(alloc::format!(
                "density p = {} must satisfy 1 ≤ p ≤ S = {}",
                self.p,
                self.states
            )));
        }
        if let CostModel::Binary { ones } = self.cost_model {
            if ones == 0 || ones > self.states {
                return Err(invalid("binary cost needs 1 ≤ H ≤ S"));
            }
        }
        Ok(())
    }

    fn edge_probability(&self) -> f64 {
        self.p / self.states as f64
    }
}

/// A random instance for `spec` with discount `alpha`; a pure function of
/// `(spec, alpha, seed)`.
pub fn generate_instance(spec: &EnsembleSpec, alpha: f64, seed: u64) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng = streams::seeded(seed);
    let states = spec.states;
    let prob = spec.edge_probability();

    let mask = sample_mask(states, prob, &mut rng)?;
    let mut q = DenseMatrix::zeros(states, states);
    for (s, targets) in mask.iter().enumerate() {
        let weights: Vec<f64> = targets.iter().map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (&t, w) in targets.iter().zip(&weights) {
            q.set(s, t, w / total);
        }
    }
    let supergraph = Supergraph::from_out_edges(states, mask)?;

    let cost = match spec.cost_model {
        CostModel::Mixed => mixed_cost(states, prob, &mut rng)?,
        CostModel::Binary { ones } => binary_cost_from(states, ones, &mut rng)?,
    };
    ProblemInstance::new(alpha, cost, q, supergraph)
}

fn sample_mask(states: usize, prob: f64, rng: &mut Stream) -> Result<Vec<Vec<usize>>> {
    for _ in 0..RESAMPLE_CAP {
        let mask: Vec<Vec<usize>> = (0..states)
            .map(|_| (0..states).filter(|_| rng.random_bool(prob)).collect())
            .collect();
        if mask.iter().all(|row| !row.is_empty()) {
            return Ok(mask);
        }
    }
    Err(Error::ResampleCap { attempts: RESAMPLE_CAP })
}

fn mixed_cost(states: usize, prob: f64, rng: &mut Stream) -> Result<Vec<f64>> {
    let mut high = vec![0.0; states];
    let mut found = false;
    for _ in 0..RESAMPLE_CAP {
        for h in high.iter_mut() {
            *h = if rng.random_bool(prob) { 1.0 } else { 0.0 };
        }
        if high.iter().any(|&h| h > 0.0) {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::ResampleCap { attempts: RESAMPLE_CAP });
    }
    Ok(high.into_iter().map(|h| h + rng.random::<f64>() * prob).collect())
}

fn binary_cost_from<R: Rng + ?Sized>(states: usize, ones: usize, rng: &mut R) -> Result<Vec<f64>> {
    if ones == 0 || ones > states {
        return Err(invalid("binary cost needs 1 ≤ H ≤ S"));
    }
    // Partial Fisher-Yates: the first `ones` slots end up a uniform subset.
    let mut index: Vec<usize> = (0..states).collect();
    let mut cost = vec![0.0; states];
    for i in 0..ones {
        let j = rng.random_range(i..states);
        index.swap(i, j);
        cost[index[i]] = 1.0;
    }
    Ok(cost)
}

/// Uniformly random binary vector with exactly `ones` unit entries.
pub fn generate_binary_cost(states: usize, ones: usize, seed: u64) -> Result<Vec<f64>> {
    binary_cost_from(states, ones, &mut streams::seeded(seed))
}

/// `E‖C‖_1` for the ensemble, accounting for the redraw of an all-zero `c1`.
pub fn expected_cost_l1(spec: &EnsembleSpec) -> f64 {
    match spec.cost_model {
        CostModel::Binary { ones } => ones as f64,
        CostModel::Mixed => {
            let prob = spec.edge_probability();
            let nonzero = 1.0 - libm::pow(1.0 - prob, spec.states as f64);
            spec.p / nonzero + spec.p / 2.0
        }
    }
}
