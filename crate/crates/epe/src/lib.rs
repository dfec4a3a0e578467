//! Instance files, experiment sweeps and reporting around `epe-core`.
//!
//! - [`io`]: instance JSON and push-trace JSON lines.
//! - [`config`]: declarative sweep descriptions and the shipped presets.
//! - [`harness`]: runs a sweep in parallel and writes one CSV row per trial.
//! - [`summary`]: per-cell aggregates, relative complexity and log-log slopes.
//! - [`bounds`]: encountered-set size against its expectation bound.

pub mod bounds;
pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod summary;

pub use error::{Error, Result};
