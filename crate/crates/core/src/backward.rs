//! Backward local-push policy evaluation with sampled transition rows.
//!
//! The first time a state enters the encountered set `U_k` its row `Q(s, ·)`
//! is estimated from `n` counted draws, and that estimate is reused for the
//! rest of the run. Keeping the rows frozen is what makes the fixed-point
//! identity `v̂_k(s) + ν_s r_k = ν_s c` hold at every iteration for any
//! completion `P` of the final row estimates; [`replay_invariant`] checks it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{DenseMatrix, ValueSolver};
use crate::model::ProblemInstance;
use crate::push::{self, ColumnEntry, ColumnSource, PushTrace};
use crate::report::EstimateReport;
use crate::sampler::{CountingSampler, EmpiricalRow};
use crate::streams::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardParams {
    /// Termination threshold on `‖r‖_∞`.
    pub epsilon: f64,
    /// Draws per newly encountered state.
    pub n: u32,
    pub trace: bool,
}

/// Row estimates `Q̂_{k*}` of the encountered states.
#[derive(Debug, Clone, PartialEq)]
pub struct EncounteredRows {
    rows: Vec<Option<EmpiricalRow>>,
    len: usize,
}

impl EncounteredRows {
    fn new(states: usize) -> Self {
        Self {
            rows: vec![None; states],
            len: 0,
        }
    }

    /// An arbitrary set of rows, mostly useful for tests.
    pub fn from_rows(rows: Vec<Option<EmpiricalRow>>) -> Self {
        let len = rows.iter().filter(|r| r.is_some()).count();
        Self { rows, len }
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    /// `|U|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, s: usize) -> bool {
        self.rows[s].is_some()
    }

    pub fn row(&self, s: usize) -> Option<&EmpiricalRow> {
        self.rows[s].as_ref()
    }

    /// Members of `U` in increasing order.
    pub fn members(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&s| self.contains(s)).collect()
    }
}

/// Everything a backward run leaves behind.
#[derive(Debug, Clone)]
pub struct BackwardRun {
    pub report: EstimateReport,
    /// `r_{k*}`.
    pub residual: Vec<f64>,
    /// `Q̂_{k*}` and `U_{k*}`.
    pub rows: EncounteredRows,
}

struct CachedRows<'s, 'a> {
    sampler: &'s mut CountingSampler<'a>,
    in_neighbors: &'s [Vec<usize>],
    n: u32,
    rows: EncounteredRows,
}

impl ColumnSource for CachedRows<'_, '_> {
    fn column(&mut self, selected: usize, out: &mut Vec<ColumnEntry>) -> Result<()> {
        for &s in &self.in_neighbors[selected] {
            if self.rows.rows[s].is_none() {
                self.rows.rows[s] = Some(self.sampler.empirical_row(s, self.n)?);
                self.rows.len += 1;
            }
            let q = self.rows.rows[s].as_ref().expect("just filled").prob(selected);
            if q > 0.0 {
                out.push((s, q));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_common(cost: &[f64], alpha: f64, in_neighbors: &[Vec<usize>], states: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0,1)"));
    }
    if cost.len() != states || in_neighbors.len() != states {
        return Err(Error::DimensionMismatch(format!(
            "{states} states, {} costs, {} in-neighbor lists",
            cost.len(),
            in_neighbors.len()
        )));
    }
    if cost.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(invalid("costs must be finite and nonnegative"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_with_stop<R, F>(
    sampler: &mut CountingSampler<'_>,
    tie_rng: &mut R,
    cost: &[f64],
    alpha: f64,
    in_neighbors: &[Vec<usize>],
    epsilon: f64,
    n: u32,
    trace: bool,
    mut stop: F,
) -> Result<BackwardRun>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> bool,
{
    let states = sampler.states();
    check_common(cost, alpha, in_neighbors, states)?;
    if n == 0 {
        return Err(invalid("per-state sample count n must be at least 1"));
    }
    let start = sampler.draw_count();
    let mut source = CachedRows {
        sampler,
        in_neighbors,
        n,
        rows: EncounteredRows::new(states),
    };
    let outcome = push::run_push(cost, alpha, epsilon, &mut source, tie_rng, trace, |src| {
        stop(src.rows.len())
    })?;
    let rows = source.rows;
    let samples_used = source.sampler.draw_count() - start;
    debug_assert_eq!(samples_used, u64::from(n) * rows.len() as u64);

    let mut report = EstimateReport::new(outcome.estimate, samples_used, outcome.iterations);
    report.encountered_size = Some(rows.len());
    report.trace = outcome.trace;
    Ok(BackwardRun {
        report,
        residual: outcome.residual,
        rows,
    })
}

/// Backward push from high-residual states, estimating each encountered
/// row once from `n` draws.
///
/// `in_neighbors[s]` lists the supergraph in-neighbors `N_in(s)`; the
/// supergraph must contain the support of the sampled chain.
pub fn backward_epe<R: Rng + ?Sized>(
    sampler: &mut CountingSampler<'_>,
    tie_rng: &mut R,
    cost: &[f64],
    alpha: f64,
    in_neighbors: &[Vec<usize>],
    params: BackwardParams,
) -> Result<BackwardRun> {
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive"));
    }
    backward_with_stop(
        sampler,
        tie_rng,
        cost,
        alpha,
        in_neighbors,
        params.epsilon,
        params.n,
        params.trace,
        |_| false,
    )
}

struct TrueRowsOnEncounter<'s> {
    q: &'s DenseMatrix,
    in_neighbors: &'s [Vec<usize>],
    seen: Vec<bool>,
    count: usize,
}

impl ColumnSource for TrueRowsOnEncounter<'_> {
    fn column(&mut self, selected: usize, out: &mut Vec<ColumnEntry>) -> Result<()> {
        for &s in &self.in_neighbors[selected] {
            if !self.seen[s] {
                self.seen[s] = true;
                self.count += 1;
            }
            let q = self.q.get(s, selected);
            if q > 0.0 {
                out.push((s, q));
            }
        }
        Ok(())
    }
}

/// The same push loop with every encountered row replaced by the true row
/// of `Q`. Needs ground truth, so it is an oracle, not an estimator; no
/// samples are charged.
pub fn backward_epe_true_rows<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    tie_rng: &mut R,
    epsilon: f64,
    trace: bool,
) -> Result<EstimateReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive"));
    }
    let in_neighbors = instance.supergraph().all_in_neighbors();
    let mut source = TrueRowsOnEncounter {
        q: instance.q(),
        in_neighbors,
        seen: vec![false; instance.states()],
        count: 0,
    };
    let outcome = push::run_push(
        instance.cost(),
        instance.alpha(),
        epsilon,
        &mut source,
        tie_rng,
        trace,
        |_| false,
    )?;
    let mut report = EstimateReport::new(outcome.estimate, 0, outcome.iterations);
    report.encountered_size = Some(source.count);
    report.trace = outcome.trace;
    Ok(report)
}

/// Per-state sample count guaranteeing `P(‖v̂ - v‖_∞ ≥ 2ε) ≤ δ`:
///
/// `⌈ 2‖c‖²_∞ α² / (ε²(1-α)²) · ln( (2S/δ) · ⌈ln(4‖c‖_∞/ε)/(1-α)⌉ ) ⌉`
///
/// The inner ceiling is clamped to at least 1, which matters once
/// `ε ≥ 4‖c‖_∞`.
pub fn sample_size_backward(epsilon: f64, delta: f64, alpha: f64, c_inf: f64, states: usize) -> Result<u64> {
    if !(epsilon > 0.0 && delta > 0.0 && c_inf > 0.0) {
        return Err(invalid("epsilon, delta and ‖c‖_∞ must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0,1)"));
    }
    if states == 0 {
        return Err(invalid("need at least one state"));
    }
    let horizon = libm::ceil(libm::log(4.0 * c_inf / epsilon) / (1.0 - alpha)).max(1.0);
    let scale = 2.0 * c_inf * c_inf * alpha * alpha / (epsilon * epsilon * (1.0 - alpha) * (1.0 - alpha));
    let n = scale * libm::log(2.0 * states as f64 / delta * horizon);
    Ok(libm::ceil(n).max(1.0) as u64)
}

/// `Q̄`: encountered rows from `Q̂_{k*}`, every other row a fresh `n`-draw
/// empirical row taken from `offline`. Those draws belong to the analysis,
/// not to the algorithm, and are never charged to a run.
pub fn build_q_over(
    rows: &EncounteredRows,
    instance: &ProblemInstance,
    n: u32,
    offline: Stream,
) -> Result<DenseMatrix> {
    let states = instance.states();
    if rows.states() != states {
        return Err(Error::DimensionMismatch(format!(
            "{} rows for {states} states",
            rows.states()
        )));
    }
    let mut sampler = CountingSampler::with_stream(instance, offline);
    let mut out = DenseMatrix::zeros(states, states);
    for s in 0..states {
        match rows.row(s) {
            Some(row) => row.write_dense(out.row_mut(s)),
            None => sampler.empirical_row(s, n)?.write_dense(out.row_mut(s)),
        }
    }
    Ok(out)
}

/// `Q̲`: encountered rows from `Q̂_{k*}`, every other row the true row of `Q`.
pub fn build_q_under(rows: &EncounteredRows, instance: &ProblemInstance) -> Result<DenseMatrix> {
    let states = instance.states();
    if rows.states() != states {
        return Err(Error::DimensionMismatch(format!(
            "{} rows for {states} states",
            rows.states()
        )));
    }
    let mut out = instance.q().clone();
    for s in 0..states {
        if let Some(row) = rows.row(s) {
            row.write_dense(out.row_mut(s));
        }
    }
    Ok(out)
}

const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Largest violation of `v̂_k(s) + ν_s r_k = ν_s c` over all `k ≤ k*` and
/// all `s`, where `ν_s = (1-α) e_sᵀ(I - αP)⁻¹`.
///
/// The identity is only claimed when `P` is row-stochastic and agrees with
/// every column estimate the run applied (equivalently, `P` copies `Q̂_{k*}`
/// on `U_{k*}` and respects the supergraph); anything else is rejected.
pub fn replay_invariant(trace: &PushTrace, p: &DenseMatrix) -> Result<f64> {
    let states = trace.cost().len();
    if p.rows() != states || p.cols() != states {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, trace has {states} states",
            p.rows(),
            p.cols()
        )));
    }
    for s in 0..states {
        let row = p.row(s);
        if row.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid(format!("row {s} of P has a negative entry")));
        }
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum - 1.0) > STOCHASTIC_TOLERANCE {
            return Err(invalid(format!("row {s} of P sums to {sum}")));
        }
    }
    let mut expected = vec![0.0; states];
    for (k, step) in trace.steps().iter().enumerate() {
        expected.iter_mut().for_each(|v| *v = 0.0);
        for &(s, q) in &step.column {
            expected[s] = q;
        }
        for (s, &q) in expected.iter().enumerate() {
            if p.get(s, step.state) != q {
                return Err(invalid(format!(
                    "P({s},{}) = {} but iteration {} used {q}",
                    step.state,
                    p.get(s, step.state),
                    k + 1
                )));
            }
        }
    }

    let solver = ValueSolver::new(p, trace.alpha())?;
    let target = solver.apply(trace.cost());
    let mut worst: f64 = 0.0;
    trace.replay(|_, estimate, residual| {
        let carried = solver.apply(residual);
        for s in 0..states {
            worst = worst.max(libm::fabs(estimate[s] + carried[s] - target[s]));
        }
    });
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Supergraph;
    use crate::streams;

    fn point_mass() -> ProblemInstance {
        let q = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        ProblemInstance::new(0.5, vec![1.0], q, Supergraph::complete(1)).unwrap()
    }

    fn params(epsilon: f64, n: u32) -> BackwardParams {
        BackwardParams {
            epsilon,
            n,
            trace: true,
        }
    }

    #[test]
    fn single_state_hand_trace() {
        let inst = point_mass();
        for n in [1, 7] {
            let mut sampler = CountingSampler::new(&inst, 3);
            let run = backward_epe(
                &mut sampler,
                &mut streams::seeded(0),
                inst.cost(),
                0.5,
                inst.supergraph().all_in_neighbors(),
                params(0.3, n),
            )
            .unwrap();
            assert_eq!(run.report.estimate, vec![0.75]);
            assert_eq!(run.residual, vec![0.25]);
            assert_eq!(run.report.iterations, 2);
            assert_eq!(run.report.samples_used, u64::from(n));
            assert_eq!(run.report.encountered_size, Some(1));
        }
    }

    #[test]
    fn large_epsilon_terminates_immediately() {
        let inst = point_mass();
        let mut sampler = CountingSampler::new(&inst, 3);
        let run = backward_epe(
            &mut sampler,
            &mut streams::seeded(0),
            inst.cost(),
            0.5,
            inst.supergraph().all_in_neighbors(),
            params(1.0, 5),
        )
        .unwrap();
        assert_eq!(run.report.estimate, vec![0.0]);
        assert_eq!(run.report.iterations, 0);
        assert_eq!(run.report.samples_used, 0);
        assert!(run.rows.is_empty());
    }

    #[test]
    fn contract_violations() {
        let inst = point_mass();
        let nbrs = inst.supergraph().all_in_neighbors();
        let mut sampler = CountingSampler::new(&inst, 3);
        let mut rng = streams::seeded(0);
        assert!(backward_epe(&mut sampler, &mut rng, inst.cost(), 0.5, nbrs, params(0.0, 1)).is_err());
        assert!(backward_epe(&mut sampler, &mut rng, inst.cost(), 0.5, nbrs, params(-1.0, 1)).is_err());
        assert!(backward_epe(&mut sampler, &mut rng, inst.cost(), 0.5, nbrs, params(0.1, 0)).is_err());
        assert!(backward_epe(&mut sampler, &mut rng, &[1.0, 2.0], 0.5, nbrs, params(0.1, 1)).is_err());
    }

    #[test]
    fn sample_size_reference_value() {
        assert_eq!(sample_size_backward(0.1, 0.1, 0.5, 1.0, 10).unwrap(), 1476);
    }

    #[test]
    fn sample_size_clamps_inner_ceiling() {
        // ln(4‖c‖/ε) ≤ 0, so the inner factor becomes 1: ⌈2·0.25/(25·0.25) · ln(200)⌉.
        let n = sample_size_backward(5.0, 0.1, 0.5, 1.0, 10).unwrap();
        let expected = (2.0f64 * 0.25 / (25.0 * 0.25) * (200.0f64).ln()).ceil() as u64;
        assert_eq!(n, expected);
        assert!(sample_size_backward(0.0, 0.1, 0.5, 1.0, 10).is_err());
        assert!(sample_size_backward(0.1, 0.1, 1.0, 1.0, 10).is_err());
        assert!(sample_size_backward(0.1, 0.1, 0.5, 0.0, 10).is_err());
    }

    #[test]
    fn completions_with_empty_and_full_sets() {
        let q = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let inst = ProblemInstance::new(0.5, vec![1.0, 0.0], q.clone(), Supergraph::complete(2)).unwrap();
        let empty = EncounteredRows::new(2);
        assert_eq!(build_q_under(&empty, &inst).unwrap(), q);
        let over = build_q_over(&empty, &inst, 4, streams::seeded(1)).unwrap();
        for s in 0..2 {
            let sum: f64 = over.row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for t in 0..2 {
                // multiples of 1/4
                assert_eq!((over.get(s, t) * 4.0).fract(), 0.0);
            }
        }

        let full = EncounteredRows::from_rows(vec![
            Some(EmpiricalRow::from_draws(vec![0, 1, 1])),
            Some(EmpiricalRow::from_draws(vec![1])),
        ]);
        let under = build_q_under(&full, &inst).unwrap();
        let over = build_q_over(&full, &inst, 4, streams::seeded(1)).unwrap();
        assert_eq!(under, over);
        assert_eq!(under.get(0, 1), 2.0 / 3.0);
        assert_eq!(under.get(1, 1), 1.0);
    }

    #[test]
    fn replay_rejects_inconsistent_completion() {
        let q = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let inst = ProblemInstance::new(0.5, vec![1.0, 0.0], q, Supergraph::complete(2)).unwrap();
        let mut sampler = CountingSampler::new(&inst, 8);
        let run = backward_epe(
            &mut sampler,
            &mut streams::seeded(0),
            inst.cost(),
            0.5,
            inst.supergraph().all_in_neighbors(),
            params(0.05, 3),
        )
        .unwrap();
        let trace = run.report.trace.as_ref().unwrap();
        let under = build_q_under(&run.rows, &inst).unwrap();
        assert!(replay_invariant(trace, &under).unwrap() <= 1e-12);
        // Rows that disagree with what the run used are refused.
        let bad = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        if under != bad {
            assert!(replay_invariant(trace, &bad).is_err());
        }
        let not_stochastic = DenseMatrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]).unwrap();
        assert!(replay_invariant(trace, &not_stochastic).is_err());
    }
}
