//! The push loop shared by every backward estimator.
//!
//! Each iteration selects `s_k` uniformly among the maximizers of the
//! residual, asks a [`ColumnSource`] for the estimated column `Q̂_k(·, s_k)`,
//! moves `(1-α) r(s_k)` into the estimate and spreads `α Q̂_k(s, s_k) r(s_k)`
//! back onto the residual of every `s` with a nonzero column entry. The
//! three algorithms differ only in where that column comes from.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};

/// One column entry `(s, Q̂_k(s, s_k))`; only nonzero entries are listed.
pub type ColumnEntry = (usize, f64);

pub(crate) trait ColumnSource {
    /// Appends the nonzero entries of the column estimate used at this
    /// iteration for the selected state.
    fn column(&mut self, selected: usize, out: &mut Vec<ColumnEntry>) -> Result<()>;
}

/// One recorded push: the selected state, its residual just before the push
/// and the column estimate that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PushStep {
    pub state: usize,
    pub residual: f64,
    pub column: Vec<ColumnEntry>,
}

/// Push history sufficient to rebuild `(v̂_k, r_k)` for every `k ≤ k*`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushTrace {
    alpha: f64,
    cost: Vec<f64>,
    steps: Vec<PushStep>,
}

impl PushTrace {
    pub fn new(alpha: f64, cost: Vec<f64>, steps: Vec<PushStep>) -> Self {
        Self { alpha, cost, steps }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn steps(&self) -> &[PushStep] {
        &self.steps
    }

    /// `k*`.
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// Calls `f(k, v̂_k, r_k)` for `k = 0..=k*`, starting from `(0, c)`.
    pub fn replay<F: FnMut(usize, &[f64], &[f64])>(&self, mut f: F) {
        let mut estimate = vec![0.0; self.cost.len()];
        let mut residual = self.cost.clone();
        f(0, &estimate, &residual);
        for (k, step) in self.steps.iter().enumerate() {
            apply_push(
                &mut estimate,
                &mut residual,
                self.alpha,
                step.state,
                step.residual,
                &step.column,
            );
            f(k + 1, &estimate, &residual);
        }
    }

    /// `(v̂_{k*}, r_{k*})` rebuilt from the trace.
    pub fn final_state(&self) -> (Vec<f64>, Vec<f64>) {
        let mut out = (Vec::new(), Vec::new());
        self.replay(|k, v, r| {
            if k == self.steps.len() {
                out = (v.to_vec(), r.to_vec());
            }
        });
        out
    }
}

/// The push update. `residual_before` is `r_{k-1}(selected)`.
#[inline]
pub(crate) fn apply_push(
    estimate: &mut [f64],
    residual: &mut [f64],
    alpha: f64,
    selected: usize,
    residual_before: f64,
    column: &[ColumnEntry],
) {
    estimate[selected] += (1.0 - alpha) * residual_before;
    residual[selected] = 0.0;
    for &(s, q) in column {
        let mass = alpha * q * residual_before;
        if s == selected {
            residual[s] = mass;
        } else {
            residual[s] += mass;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    value: f64,
    state: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.state.cmp(&self.state))
    }
}

/// Max-heap over residuals with lazy invalidation: an entry is live while
/// its value still equals the state's current residual.
struct ResidualHeap {
    heap: BinaryHeap<HeapEntry>,
}

impl ResidualHeap {
    fn new(residual: &[f64]) -> Self {
        let heap = residual
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(state, &value)| HeapEntry { value, state })
            .collect();
        Self { heap }
    }

    fn update(&mut self, state: usize, value: f64) {
        if value > 0.0 {
            self.heap.push(HeapEntry { value, state });
        }
    }

    /// `‖r‖_∞` (residuals are nonnegative).
    fn max(&mut self, residual: &[f64]) -> f64 {
        while let Some(top) = self.heap.peek() {
            if residual[top.state] == top.value {
                return top.value;
            }
            self.heap.pop();
        }
        0.0
    }

    /// Removes and returns a uniformly chosen maximizer; the other tied
    /// maximizers stay in the heap.
    fn take_max<R: Rng + ?Sized>(&mut self, residual: &[f64], rng: &mut R) -> Option<usize> {
        let top = self.max(residual);
        if top <= 0.0 {
            return None;
        }
        let mut tied = Vec::new();
        while let Some(entry) = self.heap.peek() {
            if entry.value != top {
                break;
            }
            let entry = self.heap.pop().expect("peeked");
            if residual[entry.state] == entry.value {
                tied.push(entry.state);
            }
        }
        tied.sort_unstable();
        tied.dedup();
        let pick = if tied.len() > 1 {
            rng.random_range(0..tied.len())
        } else {
            0
        };
        let chosen = tied[pick];
        for (i, &s) in tied.iter().enumerate() {
            if i != pick {
                self.heap.push(HeapEntry { value: top, state: s });
            }
        }
        Some(chosen)
    }
}

pub(crate) struct PushOutcome {
    pub estimate: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: u64,
    pub trace: Option<PushTrace>,
}

/// `10 ⌈S ‖c‖_∞ / (ε(1-α))⌉`, ten times the largest `k*` any valid run can reach.
pub(crate) fn iteration_cap(cost: &[f64], alpha: f64, epsilon: f64) -> u64 {
    let c_inf = crate::linalg::norm_inf(cost);
    let bound = libm::ceil(cost.len() as f64 * c_inf / (epsilon * (1.0 - alpha)));
    // Float-to-int casts saturate.
    (bound as u64).saturating_mul(10)
}

/// Runs pushes while `‖r‖_∞ > epsilon` and `stop(source)` is false.
pub(crate) fn run_push<C, R, F>(
    cost: &[f64],
    alpha: f64,
    epsilon: f64,
    source: &mut C,
    tie_rng: &mut R,
    record_trace: bool,
    mut stop: F,
) -> Result<PushOutcome>
where
    C: ColumnSource,
    R: Rng + ?Sized,
    F: FnMut(&C) -> bool,
{
    let cap = iteration_cap(cost, alpha, epsilon);
    let mut estimate = vec![0.0; cost.len()];
    let mut residual = cost.to_vec();
    let mut heap = ResidualHeap::new(&residual);
    let mut steps = Vec::new();
    let mut column = Vec::new();
    let mut iterations = 0u64;

    while heap.max(&residual) > epsilon && !stop(source) {
        if iterations >= cap {
            return Err(Error::IterationCap { cap });
        }
        let selected = heap.take_max(&residual, tie_rng).expect("positive maximum exists");
        let before = residual[selected];
        column.clear();
        source.column(selected, &mut column)?;
        apply_push(&mut estimate, &mut residual, alpha, selected, before, &column);
        heap.update(selected, residual[selected]);
        for &(s, _) in &column {
            if s != selected {
                heap.update(s, residual[s]);
            }
        }
        iterations += 1;
        if record_trace {
            steps.push(PushStep {
                state: selected,
                residual: before,
                column: column.clone(),
            });
        }
    }

    Ok(PushOutcome {
        estimate,
        residual,
        iterations,
        trace: record_trace.then(|| PushTrace::new(alpha, cost.to_vec(), steps)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams;

    #[test]
    fn heap_max_matches_linear_scan() {
        let mut rng = streams::seeded(11);
        let mut residual: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let mut heap = ResidualHeap::new(&residual);
        for _ in 0..2000 {
            let scan = residual.iter().cloned().fold(0.0, f64::max);
            assert_eq!(heap.max(&residual), scan);
            let s = heap.take_max(&residual, &mut rng).unwrap();
            assert_eq!(residual[s], scan);
            // Perturb a few entries, sometimes to exact ties.
            residual[s] = rng.random::<f64>() * 0.5;
            heap.update(s, residual[s]);
            let t = rng.random_range(0..50);
            residual[t] = if rng.random::<bool>() {
                residual[s]
            } else {
                rng.random::<f64>()
            };
            heap.update(t, residual[t]);
        }
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let residual = vec![0.5, 1.0, 0.2, 1.0, 1.0];
        let mut rng = streams::seeded(5);
        let mut counts = [0usize; 5];
        for _ in 0..30_000 {
            let mut heap = ResidualHeap::new(&residual);
            counts[heap.take_max(&residual, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[2], 0);
        for i in [1, 3, 4] {
            assert!((counts[i] as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015, "{counts:?}");
        }
    }

    #[test]
    fn untaken_ties_remain_available() {
        let residual = vec![1.0, 1.0, 1.0];
        let mut heap = ResidualHeap::new(&residual);
        let mut rng = streams::seeded(0);
        let first = heap.take_max(&residual, &mut rng).unwrap();
        let mut left: Vec<usize> = (0..3).filter(|&s| s != first).collect();
        let second = heap.take_max(&residual, &mut rng).unwrap();
        assert!(left.contains(&second));
        left.retain(|&s| s != second);
        assert_eq!(heap.take_max(&residual, &mut rng), Some(left[0]));
        assert_eq!(heap.take_max(&residual, &mut rng), None);
    }

    #[test]
    fn self_loop_push_replaces_residual() {
        let mut v = vec![0.0];
        let mut r = vec![1.0];
        apply_push(&mut v, &mut r, 0.5, 0, 1.0, &[(0, 1.0)]);
        assert_eq!((v[0], r[0]), (0.5, 0.5));
    }
}
