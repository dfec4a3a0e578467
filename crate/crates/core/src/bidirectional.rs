//! Backward push followed by forward walks on the completed chain `Q̲`.
//!
//! After the backward stage, `v(s) ≈ v̂_{k*}(s) + μ̲_s r_{k*}` where `μ̲_s` is
//! the discounted occupation measure of `s` under `Q̲` (encountered rows from
//! `Q̂_{k*}`, all other rows from `Q`). The residual term is the mean of
//! `r_{k*}(Z)` with `Z` the endpoint of a walk of Geometric(1-α) length on
//! `Q̲`. Steps leaving encountered states reuse the stored empirical row and
//! cost nothing; steps leaving other states are real, counted draws.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::backward::{self, EncounteredRows};
use crate::error::{invalid, Result};
use crate::linalg::{self, DenseMatrix};
use crate::report::EstimateReport;
use crate::sampler::{CountingSampler, EmpiricalRow};

/// In dynamic mode the backward stage treats residuals below this fraction
/// of `‖c‖_∞` as exhausted.
pub const DYNAMIC_RESIDUAL_FLOOR: f64 = 1e-12;

/// Walks longer than `WALK_CAP_FACTOR / (1-α)` steps are truncated.
pub const WALK_CAP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Stop the backward stage once `‖r_k‖_∞ ≤ epsilon`.
    Fixed { epsilon: f64 },
    /// Stop the backward stage at the first `k` with `|U_k| n_B ≥ S n_F`.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidirectionalConfig {
    /// Draws per newly encountered state in the backward stage.
    pub n_backward: u32,
    /// Forward walks per state.
    pub n_forward: u32,
    pub termination: Termination,
}

impl BidirectionalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_backward == 0 || self.n_forward == 0 {
            return Err(invalid("n_B and n_F must be at least 1"));
        }
        if let Termination::Fixed { epsilon } = self.termination {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(invalid("epsilon must be positive in fixed mode"));
            }
        }
        Ok(())
    }
}

/// One-step transition kernel used by forward walks.
pub trait Transition {
    fn states(&self) -> usize;
    fn step<R: Rng + ?Sized>(&mut self, state: usize, rng: &mut R) -> Result<usize>;
}

/// `Q̲` resolved lazily: stored empirical rows on `U_{k*}`, counted draws
/// from the true chain elsewhere.
pub struct CompletedChain<'r, 's, 'a> {
    pub rows: &'r EncounteredRows,
    pub sampler: &'s mut CountingSampler<'a>,
}

impl Transition for CompletedChain<'_, '_, '_> {
    fn states(&self) -> usize {
        self.rows.states()
    }

    fn step<R: Rng + ?Sized>(&mut self, state: usize, rng: &mut R) -> Result<usize> {
        match self.rows.row(state) {
            Some(row) => Ok(row.sample(rng)),
            None => self.sampler.sample_next(state),
        }
    }
}

/// A fully known matrix; steps are uncounted.
pub struct MatrixChain<'m> {
    matrix: &'m DenseMatrix,
}

impl<'m> MatrixChain<'m> {
    pub fn new(matrix: &'m DenseMatrix) -> Self {
        Self { matrix }
    }
}

impl Transition for MatrixChain<'_> {
    fn states(&self) -> usize {
        self.matrix.rows()
    }

    fn step<R: Rng + ?Sized>(&mut self, state: usize, rng: &mut R) -> Result<usize> {
        let row = self.matrix.row(state);
        let total: f64 = row.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut last = state;
        for (t, &p) in row.iter().enumerate() {
            if p > 0.0 {
                if u < p {
                    return Ok(t);
                }
                u -= p;
                last = t;
            }
        }
        Ok(last)
    }
}

/// Endpoint of a geometric-length walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkEnd {
    pub state: usize,
    /// The drawn length exceeded the cap and the walk stopped early.
    pub capped: bool,
}

/// `L ~ Geometric(1-α)` on `{0, 1, ...}` with `P(L = t) = (1-α)α^t`, by
/// inversion: `L = ⌊ln U / ln α⌋`, `U` uniform on `(0, 1]`.
pub fn geometric_length<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    let u = 1.0 - rng.random::<f64>();
    let l = libm::floor(libm::log(u) / libm::log(alpha));
    // Saturating cast; the caller caps the walk anyway.
    l as u64
}

pub(crate) fn walk_cap(alpha: f64) -> u64 {
    libm::ceil(WALK_CAP_FACTOR / (1.0 - alpha)) as u64
}

/// Walks `L ~ Geometric(1-α)` steps from `start`; the endpoint is
/// distributed as `(1-α) e_startᵀ (I - αP)⁻¹` for the kernel `P`.
pub fn sample_geometric_endpoint<T, R>(start: usize, alpha: f64, chain: &mut T, rng: &mut R) -> Result<WalkEnd>
where
    T: Transition + ?Sized,
    R: Rng + ?Sized,
{
    if start >= chain.states() {
        return Err(crate::Error::InvalidState {
            state: start,
            states: chain.states(),
        });
    }
    let cap = walk_cap(alpha);
    let length = geometric_length(alpha, rng);
    let steps = length.min(cap);
    let mut state = start;
    for _ in 0..steps {
        state = chain.step(state, rng)?;
    }
    Ok(WalkEnd {
        state,
        capped: length > cap,
    })
}

/// Result of a bidirectional run.
#[derive(Debug, Clone)]
pub struct BidirectionalRun {
    pub report: EstimateReport,
    /// Backward-stage estimate `v̂_{k*}`.
    pub backward_estimate: Vec<f64>,
    /// `r_{k*}`.
    pub residual: Vec<f64>,
    /// `Q̂_{k*}` and `U_{k*}`.
    pub rows: EncounteredRows,
    /// Samples charged to the backward stage.
    pub backward_samples: u64,
}

/// Backward stage, then `n_F` geometric walks on `Q̲` from every state:
/// `v̂_BD(s) = v̂_{k*}(s) + (1/n_F) Σ_i r_{k*}(Z_{s,i})`.
///
/// `rng` drives argmax tie-breaks, walk lengths and steps through stored
/// empirical rows; true-chain draws come from `sampler`.
pub fn bidirectional_epe<R: Rng + ?Sized>(
    sampler: &mut CountingSampler<'_>,
    rng: &mut R,
    cost: &[f64],
    alpha: f64,
    in_neighbors: &[Vec<usize>],
    config: BidirectionalConfig,
) -> Result<BidirectionalRun> {
    config.validate()?;
    let states = sampler.states();
    let start = sampler.draw_count();

    let run = match config.termination {
        Termination::Fixed { epsilon } => backward::backward_with_stop(
            sampler,
            rng,
            cost,
            alpha,
            in_neighbors,
            epsilon,
            config.n_backward,
            false,
            |_| false,
        )?,
        Termination::Dynamic => {
            let floor = DYNAMIC_RESIDUAL_FLOOR * linalg::norm_inf(cost);
            let budget = states as u64 * u64::from(config.n_forward);
            let per_state = u64::from(config.n_backward);
            backward::backward_with_stop(
                sampler,
                rng,
                cost,
                alpha,
                in_neighbors,
                floor,
                config.n_backward,
                false,
                |encountered| encountered as u64 * per_state >= budget,
            )?
        }
    };
    let backward_samples = sampler.draw_count() - start;

    let mut estimate = run.report.estimate.clone();
    let mut capped = 0u64;
    let mut chain = CompletedChain {
        rows: &run.rows,
        sampler,
    };
    let n_f = f64::from(config.n_forward);
    for (s, value) in estimate.iter_mut().enumerate() {
        let mut total = 0.0;
        for _ in 0..config.n_forward {
            let end = sample_geometric_endpoint(s, alpha, &mut chain, rng)?;
            capped += u64::from(end.capped);
            total += run.residual[end.state];
        }
        *value += total / n_f;
    }

    let samples_used = chain.sampler.draw_count() - start;
    let mut report = EstimateReport::new(estimate, samples_used, run.report.iterations);
    report.encountered_size = Some(run.rows.len());
    report.capped_walks = capped;
    Ok(BidirectionalRun {
        report,
        backward_estimate: run.report.estimate,
        residual: run.residual,
        rows: run.rows,
        backward_samples,
    })
}

fn check_tolerances(epsilon_rel: f64, epsilon_abs: f64, delta: f64) -> Result<()> {
    if !(epsilon_rel > 0.0 && epsilon_rel < 1.0) {
        return Err(invalid("epsilon_rel must lie in (0,1)"));
    }
    if !(epsilon_abs > 0.0 && delta > 0.0) {
        return Err(invalid("epsilon_abs and delta must be positive"));
    }
    Ok(())
}

/// Forward walks per state for the relative-plus-absolute guarantee:
/// `⌈324 ε ln(4S/δ) / (ε_rel² ε_abs)⌉`, `ε` being the backward threshold.
pub fn sample_size_forward_bd(
    epsilon: f64,
    epsilon_rel: f64,
    epsilon_abs: f64,
    delta: f64,
    states: usize,
) -> Result<u64> {
    check_tolerances(epsilon_rel, epsilon_abs, delta)?;
    if !(epsilon > 0.0) || states == 0 {
        return Err(invalid("epsilon must be positive and S at least 1"));
    }
    let n = 324.0 * epsilon * libm::log(4.0 * states as f64 / delta) / (epsilon_rel * epsilon_rel * epsilon_abs);
    Ok(libm::ceil(n).max(1.0) as u64)
}

/// Backward draws per encountered state for the same guarantee:
///
/// `⌈ 3 ln(4S²/δ) / ((ln(1 + ε_rel/2))² q_min) · ⌈ln(2‖c‖_∞/ε_abs)/(1-α)⌉² ⌉`
///
/// `q_min` is the smallest positive entry of `Q`, which a sampling-only
/// agent cannot observe; the caller has to supply it.
pub fn sample_size_backward_bd(
    epsilon_rel: f64,
    epsilon_abs: f64,
    delta: f64,
    alpha: f64,
    c_inf: f64,
    states: usize,
    q_min: f64,
) -> Result<u64> {
    check_tolerances(epsilon_rel, epsilon_abs, delta)?;
    if !(q_min > 0.0 && q_min <= 1.0) {
        return Err(invalid("q_min must lie in (0,1]"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0,1)"));
    }
    if !(c_inf > 0.0) || states == 0 {
        return Err(invalid("‖c‖_∞ must be positive and S at least 1"));
    }
    let s = states as f64;
    let horizon = libm::ceil(libm::log(2.0 * c_inf / epsilon_abs) / (1.0 - alpha)).max(1.0);
    let shrink = libm::log(1.0 + epsilon_rel / 2.0);
    let n = 3.0 * libm::log(4.0 * s * s / delta) / (shrink * shrink * q_min) * horizon * horizon;
    Ok(libm::ceil(n).max(1.0) as u64)
}

/// Value function of a fully offline empirical chain `Q̃` built from `n`
/// counted draws per state (`n S` samples in total).
pub fn plug_in_estimate(sampler: &mut CountingSampler<'_>, cost: &[f64], alpha: f64, n: u32) -> Result<EstimateReport> {
    let states = sampler.states();
    if cost.len() != states {
        return Err(crate::Error::DimensionMismatch(alloc::format!(
            "{} costs for {states} states",
            cost.len()
        )));
    }
    let start = sampler.draw_count();
    let mut q_tilde = DenseMatrix::zeros(states, states);
    for s in 0..states {
        let row: EmpiricalRow = sampler.empirical_row(s, n)?;
        row.write_dense(q_tilde.row_mut(s));
    }
    let estimate = linalg::value_function(&q_tilde, cost, alpha)?;
    Ok(EstimateReport::new(estimate, sampler.draw_count() - start, 0))
}

/// `μ̲_s` for every `s` as a dense matrix (row `s` is the measure of `s`).
pub fn occupation_measures(p: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
    let n = p.rows();
    let solver = linalg::ValueSolver::new(p, alpha)?;
    // Column t of (1-α)(I-αP)⁻¹ is the solve against e_t.
    let mut out = DenseMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for t in 0..n {
        unit[t] = 1.0;
        let column = solver.apply(&unit);
        unit[t] = 0.0;
        for (s, v) in column.into_iter().enumerate() {
            out.set(s, t, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProblemInstance, Supergraph};
    use crate::streams;

    fn point_mass() -> ProblemInstance {
        let q = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        ProblemInstance::new(0.5, vec![1.0], q, Supergraph::complete(1)).unwrap()
    }

    #[test]
    fn single_state_is_exact() {
        let inst = point_mass();
        for n_forward in [1, 13] {
            let mut sampler = CountingSampler::new(&inst, 1);
            let run = bidirectional_epe(
                &mut sampler,
                &mut streams::seeded(2),
                inst.cost(),
                0.5,
                inst.supergraph().all_in_neighbors(),
                BidirectionalConfig {
                    n_backward: 3,
                    n_forward,
                    termination: Termination::Fixed { epsilon: 0.3 },
                },
            )
            .unwrap();
            assert_eq!(run.backward_estimate, vec![0.75]);
            assert_eq!(run.report.estimate, vec![1.0]);
            // The only row is encountered, so walks are free.
            assert_eq!(run.report.samples_used, 3);
        }
    }

    #[test]
    fn zero_cost_adds_nothing() {
        let q = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let inst = ProblemInstance::new(0.5, vec![0.0, 0.0], q, Supergraph::complete(2)).unwrap();
        let mut sampler = CountingSampler::new(&inst, 1);
        let run = bidirectional_epe(
            &mut sampler,
            &mut streams::seeded(2),
            inst.cost(),
            0.5,
            inst.supergraph().all_in_neighbors(),
            BidirectionalConfig {
                n_backward: 3,
                n_forward: 10,
                termination: Termination::Fixed { epsilon: 0.1 },
            },
        )
        .unwrap();
        assert_eq!(run.report.estimate, vec![0.0, 0.0]);
        assert_eq!(run.report.iterations, 0);
    }

    #[test]
    fn config_checks() {
        let bad = BidirectionalConfig {
            n_backward: 0,
            n_forward: 1,
            termination: Termination::Dynamic,
        };
        assert!(bad.validate().is_err());
        let bad = BidirectionalConfig {
            n_backward: 1,
            n_forward: 1,
            termination: Termination::Fixed { epsilon: 0.0 },
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn geometric_length_distribution() {
        let mut rng = streams::seeded(77);
        let alpha = 0.6;
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let l = geometric_length(alpha, &mut rng) as usize;
            if l < 4 {
                counts[l] += 1;
            }
        }
        for (t, &c) in counts.iter().enumerate() {
            let p = (1.0 - alpha) * alpha.powi(t as i32);
            assert!((c as f64 / n as f64 - p).abs() < 0.005, "t={t}");
        }
    }

    #[test]
    fn single_state_walks_stay_put() {
        let m = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let mut chain = MatrixChain::new(&m);
        let mut rng = streams::seeded(0);
        for _ in 0..100 {
            assert_eq!(
                sample_geometric_endpoint(0, 0.9, &mut chain, &mut rng).unwrap().state,
                0
            );
        }
        assert!(sample_geometric_endpoint(1, 0.9, &mut chain, &mut rng).is_err());
    }

    #[test]
    fn sample_size_reference_values() {
        // Independent double-precision evaluations: 7764.938…, 179896.08…
        assert_eq!(sample_size_forward_bd(0.1, 0.5, 0.1, 0.1, 10).unwrap(), 7765);
        assert_eq!(
            sample_size_backward_bd(0.5, 0.1, 0.1, 0.5, 1.0, 10, 0.1).unwrap(),
            179_897
        );
    }

    #[test]
    fn sample_size_monotonicity() {
        let a = sample_size_forward_bd(0.2, 0.5, 0.1, 0.1, 10).unwrap();
        let b = sample_size_forward_bd(0.1, 0.5, 0.1, 0.1, 10).unwrap();
        assert!(a >= 2 * b - 1 && a <= 2 * b);
        assert!(sample_size_forward_bd(0.1, 0.5, 0.1, 0.1, 100).unwrap() >= b);
        let lo = sample_size_backward_bd(0.5, 0.1, 0.1, 0.5, 1.0, 10, 0.2).unwrap();
        let hi = sample_size_backward_bd(0.5, 0.1, 0.1, 0.5, 1.0, 10, 0.1).unwrap();
        assert!(lo < hi);
        assert!(sample_size_backward_bd(0.5, 0.1, 0.1, 0.5, 2.0, 10, 0.1).unwrap() > hi);
        assert!(sample_size_backward_bd(0.5, 0.1, 0.1, 0.5, 1.0, 10, 0.0).is_err());
        assert!(sample_size_forward_bd(0.1, 1.0, 0.1, 0.1, 10).is_err());
    }

    #[test]
    fn plug_in_on_deterministic_rows_is_exact() {
        let q = DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let inst = ProblemInstance::new(0.7, vec![1.0, 0.0, 0.5], q.clone(), Supergraph::from_support(&q)).unwrap();
        let mut sampler = CountingSampler::new(&inst, 4);
        let report = plug_in_estimate(&mut sampler, inst.cost(), 0.7, 6).unwrap();
        assert_eq!(report.samples_used, 18);
        let v = inst.exact_value();
        for (a, b) in report.estimate.iter().zip(&v) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
