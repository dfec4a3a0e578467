use alloc::vec::Vec;

use crate::push::PushTrace;

/// What an estimator returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Value estimate, one entry per state.
    pub estimate: Vec<f64>,
    /// Transition draws charged to this run.
    pub samples_used: u64,
    /// Push iterations `k*` for push algorithms, trajectories for forward ones.
    pub iterations: u64,
    /// `|U_{k*}|` for algorithms that keep an encountered set.
    pub encountered_size: Option<usize>,
    /// Forward walks truncated at the walk-length cap.
    pub capped_walks: u64,
    pub trace: Option<PushTrace>,
}

impl EstimateReport {
    pub(crate) fn new(estimate: Vec<f64>, samples_used: u64, iterations: u64) -> Self {
        Self {
            estimate,
            samples_used,
            iterations,
            encountered_size: None,
            capped_walks: 0,
            trace: None,
        }
    }
}
