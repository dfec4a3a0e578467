//! Two push variants that frame the sampled estimator: the known-`Q` push,
//! whose fixed-point identity is exact, and the variant that re-estimates
//! the needed column at every iteration, whose error process is a
//! zero-mean martingale.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::backward::check_common;
use crate::error::{invalid, Error, Result};
use crate::linalg::{DenseMatrix, ValueSolver};
use crate::push::{self, ColumnEntry, ColumnSource, PushTrace};
use crate::report::EstimateReport;
use crate::sampler::CountingSampler;

struct ExactColumns<'q> {
    q: &'q DenseMatrix,
    column_support: Vec<Vec<usize>>,
}

impl ColumnSource for ExactColumns<'_> {
    fn column(&mut self, selected: usize, out: &mut Vec<ColumnEntry>) -> Result<()> {
        out.extend(
            self.column_support[selected]
                .iter()
                .map(|&s| (s, self.q.get(s, selected))),
        );
        Ok(())
    }
}

/// Push with the true matrix: `v̂_k(s) + μ_s r_k = v(s)` holds exactly at
/// every iteration, so the output is within `ε` of `v` everywhere. Draws
/// nothing.
pub fn approx_contributions<R: Rng + ?Sized>(
    q: &DenseMatrix,
    cost: &[f64],
    alpha: f64,
    epsilon: f64,
    tie_rng: &mut R,
    trace: bool,
) -> Result<EstimateReport> {
    let states = cost.len();
    if q.rows() != states || q.cols() != states {
        return Err(Error::DimensionMismatch(alloc::format!(
            "Q is {}x{} for {states} costs",
            q.rows(),
            q.cols()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive"));
    }
    let mut column_support = vec![Vec::new(); states];
    for s in 0..states {
        for (t, &p) in q.row(s).iter().enumerate() {
            if p > 0.0 {
                column_support[t].push(s);
            }
        }
    }
    check_common(cost, alpha, &column_support, states)?;
    let mut source = ExactColumns { q, column_support };
    let outcome = push::run_push(cost, alpha, epsilon, &mut source, tie_rng, trace, |_| false)?;
    let mut report = EstimateReport::new(outcome.estimate, 0, outcome.iterations);
    report.trace = outcome.trace;
    Ok(report)
}

struct FreshColumns<'s, 'a> {
    sampler: &'s mut CountingSampler<'a>,
    in_neighbors: &'s [Vec<usize>],
    n: u32,
}

impl ColumnSource for FreshColumns<'_, '_> {
    fn column(&mut self, selected: usize, out: &mut Vec<ColumnEntry>) -> Result<()> {
        for &s in &self.in_neighbors[selected] {
            let mut hits = 0u32;
            for _ in 0..self.n {
                if self.sampler.sample_next(s)? == selected {
                    hits += 1;
                }
            }
            if hits > 0 {
                out.push((s, f64::from(hits) / f64::from(self.n)));
            }
        }
        Ok(())
    }
}

/// Push that draws `n` fresh samples from every `s ∈ N_in(s_k)` at every
/// iteration and keeps only the hit frequency of `s_k`. Costs
/// `n Σ_k |N_in(s_k)|` draws.
#[allow(clippy::too_many_arguments)]
pub fn backward_epe_alternative<R: Rng + ?Sized>(
    sampler: &mut CountingSampler<'_>,
    tie_rng: &mut R,
    cost: &[f64],
    alpha: f64,
    in_neighbors: &[Vec<usize>],
    epsilon: f64,
    n: u32,
    trace: bool,
) -> Result<EstimateReport> {
    check_common(cost, alpha, in_neighbors, sampler.states())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive"));
    }
    if n == 0 {
        return Err(invalid("per-state sample count n must be at least 1"));
    }
    let start = sampler.draw_count();
    let mut source = FreshColumns {
        sampler,
        in_neighbors,
        n,
    };
    let outcome = push::run_push(cost, alpha, epsilon, &mut source, tie_rng, trace, |_| false)?;
    let samples_used = source.sampler.draw_count() - start;
    let mut report = EstimateReport::new(outcome.estimate, samples_used, outcome.iterations);
    report.trace = outcome.trace;
    Ok(report)
}

/// `e_k(s) = v̂_k(s) + μ_s r_k - v(s)` for every `k ≤ k*` and every `s`,
/// with `μ_s` and `v` taken from the true matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProcessSample {
    values: Vec<Vec<f64>>,
}

impl ErrorProcessSample {
    /// `e_k(·)`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// `e_{k*}(·)`.
    pub fn terminal(&self) -> &[f64] {
        self.values.last().expect("k = 0 is always present")
    }

    /// `k* + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }
}

pub fn error_process(trace: &PushTrace, q: &DenseMatrix) -> Result<ErrorProcessSample> {
    let states = trace.cost().len();
    if q.rows() != states || q.cols() != states {
        return Err(Error::DimensionMismatch(alloc::format!(
            "Q is {}x{}, trace has {states} states",
            q.rows(),
            q.cols()
        )));
    }
    let solver = ValueSolver::new(q, trace.alpha())?;
    let value = solver.apply(trace.cost());
    let mut values = Vec::with_capacity(trace.iterations() + 1);
    trace.replay(|_, estimate, residual| {
        let carried = solver.apply(residual);
        values.push((0..states).map(|s| estimate[s] + carried[s] - value[s]).collect());
    });
    Ok(ErrorProcessSample { values })
}
