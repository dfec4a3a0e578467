//! Sampling-only access to the transition matrix.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::ProblemInstance;
use crate::streams::{self, Stream};

#[derive(Debug, Clone)]
struct RowCdf {
    states: Vec<usize>,
    cumulative: Vec<f64>,
}

impl RowCdf {
    fn build(row: &[f64]) -> Self {
        let mut states = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (t, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                states.push(t);
                cumulative.push(acc);
            }
        }
        Self { states, cumulative }
    }

    fn draw(&self, rng: &mut Stream) -> usize {
        let total = *self.cumulative.last().expect("stochastic rows have positive mass");
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.states[idx.min(self.states.len() - 1)]
    }
}

/// The only channel through which estimators observe `Q`.
///
/// Each call to [`sample_next`](Self::sample_next) draws `s' ~ Q(s, ·)` by
/// inverse CDF and adds one to [`draw_count`](Self::draw_count).
#[derive(Debug, Clone)]
pub struct CountingSampler<'a> {
    instance: &'a ProblemInstance,
    rng: Stream,
    draws: u64,
    rows: Vec<Option<RowCdf>>,
}

impl<'a> CountingSampler<'a> {
    pub fn new(instance: &'a ProblemInstance, seed: u64) -> Self {
        Self::with_stream(instance, streams::seeded(seed))
    }

    pub fn with_stream(instance: &'a ProblemInstance, rng: Stream) -> Self {
        Self {
            instance,
            rng,
            draws: 0,
            rows: vec![None; instance.states()],
        }
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.instance
    }

    pub fn states(&self) -> usize {
        self.instance.states()
    }

    /// Transition draws taken so far.
    pub fn draw_count(&self) -> u64 {
        self.draws
    }

    /// One draw from `Q(s, ·)`.
    pub fn sample_next(&mut self, s: usize) -> Result<usize> {
        let states = self.states();
        if s >= states {
            return Err(Error::InvalidState { state: s, states });
        }
        let q = self.instance.q();
        let cdf = self.rows[s].get_or_insert_with(|| RowCdf::build(q.row(s)));
        self.draws += 1;
        Ok(cdf.draw(&mut self.rng))
    }

    /// Empirical estimate of `Q(s, ·)` from `n` counted draws.
    pub fn empirical_row(&mut self, s: usize, n: u32) -> Result<EmpiricalRow> {
        if n == 0 {
            return Err(invalid("per-state sample count must be at least 1"));
        }
        let mut draws = Vec::with_capacity(n as usize);
        for _ in 0..n {
            draws.push(self.sample_next(s)?);
        }
        Ok(EmpiricalRow::from_draws(draws))
    }
}

/// Empirical distribution of `n` draws, stored as sorted `(state, count)` pairs.
///
/// Probabilities are always computed as `count / n`, so every copy of a row
/// carries bit-identical entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalRow {
    n: u32,
    entries: Vec<(usize, u32)>,
}

impl EmpiricalRow {
    pub fn from_draws(mut draws: Vec<usize>) -> Self {
        draws.sort_unstable();
        let mut entries: Vec<(usize, u32)> = Vec::new();
        for d in &draws {
            match entries.last_mut() {
                Some((t, c)) if t == d => *c += 1,
                _ => entries.push((*d, 1)),
            }
        }
        Self {
            n: draws.len() as u32,
            entries,
        }
    }

    /// A point mass on `state`.
    pub fn point_mass(state: usize) -> Self {
        Self {
            n: 1,
            entries: vec![(state, 1)],
        }
    }

    pub fn sample_count(&self) -> u32 {
        self.n
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// `count(t) / n`; zero for states never drawn.
    pub fn prob(&self, t: usize) -> f64 {
        match self.entries.binary_search_by_key(&t, |&(s, _)| s) {
            Ok(i) => self.entries[i].1 as f64 / self.n as f64,
            Err(_) => 0.0,
        }
    }

    /// `(state, probability)` for every drawn state.
    pub fn probabilities(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(move |&(t, c)| (t, c as f64 / self.n as f64))
    }

    /// Writes the row densely into `out`, zeroing everything else.
    pub fn write_dense(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (t, p) in self.probabilities() {
            out[t] = p;
        }
    }

    /// One uncounted draw from the stored empirical distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut k = rng.random_range(0..self.n);
        for &(t, c) in &self.entries {
            if k < c {
                return t;
            }
            k -= c;
        }
        unreachable!("counts sum to n")
    }
}
