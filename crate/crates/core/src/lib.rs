//! Estimators for the discounted value function `v = (1-α)(I-αQ)⁻¹c` of a
//! Markov chain whose transition matrix can only be sampled row by row.
//!
//! The crate is `no_std` (it needs `alloc`). Every estimator sees the chain
//! through a [`CountingSampler`], which tallies each transition draw so the
//! sample cost of a run is exact.
//!
//! - [`backward`]: local-push estimation working backward from costly states,
//!   with the sample-size calculator and invariant replay tools.
//! - [`bidirectional`]: backward push followed by geometric-length forward walks.
//! - [`forward`]: per-state truncated trajectory averaging.
//! - [`baselines`]: the known-`Q` push and the resampling push variant.
//! - [`instance_gen`]: random problem ensembles.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backward;
pub mod baselines;
pub mod bidirectional;
mod error;
pub mod forward;
pub mod instance_gen;
pub mod linalg;
pub mod model;
mod push;
mod report;
pub mod sampler;
pub mod streams;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use model::{ProblemInstance, Supergraph, Violation};
pub use push::{PushStep, PushTrace};
pub use report::EstimateReport;
pub use sampler::{CountingSampler, EmpiricalRow};
