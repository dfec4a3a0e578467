//! Encountered-set size against its expectation bound
//! `E|U_{k*}| ≤ S c̄ d̄ / (ε(1-α))`, with `c̄ = E‖C‖_1 / S` for the ensemble
//! (exact for both cost models, whose entries are exchangeable) and `d̄`
//! the realized average in-degree of each instance.

use std::collections::BTreeMap;
use std::io::Write;

use epe_core::instance_gen::{expected_cost_l1, generate_instance};
use serde::Serialize;

use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::harness::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    #[serde(rename = "S")]
    pub states: usize,
    pub p: f64,
    pub algorithm: String,
    pub trials: usize,
    pub encountered_mean: f64,
    pub encountered_max: usize,
    pub avg_degree_mean: f64,
    pub c_bar: f64,
    pub epsilon: f64,
    /// Mean over trials of `S c̄ d̄ / (ε(1-α))`.
    pub bound: f64,
    pub pass: bool,
}

/// One row per `(S, algorithm)` cell of a `backward` algorithm in `config`;
/// every record's instance is regenerated from its seed to read off `d̄`.
pub fn bound_report(records: &[TrialRecord], config: &ExperimentConfig) -> Result<Vec<BoundRow>> {
    let mut cells: BTreeMap<(usize, &str), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.states, r.algorithm.as_str())).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((states, label), group) in cells {
        let Some(algorithm) = config.algorithms.iter().find(|a| a.label() == label) else {
            continue;
        };
        let AlgorithmSpec::Backward { epsilon, .. } = &algorithm.spec else {
            continue;
        };
        let epsilon = epsilon.positive(states)?;
        let spec = config.ensemble(states)?;
        let c_bar = expected_cost_l1(&spec) / states as f64;
        let scale = states as f64 * c_bar / (epsilon * (1.0 - config.alpha));

        let mut degree_total = 0.0;
        let mut encountered_total = 0.0;
        let mut encountered_max = 0;
        for r in &group {
            if r.p != spec.p {
                return Err(Error::Input(format!(
                    "record at S = {states} has p = {}, config gives {}",
                    r.p, spec.p
                )));
            }
            let encountered = r
                .encountered_size
                .ok_or_else(|| Error::Input(format!("{label} record without encountered_size")))?;
            let instance = generate_instance(&spec, config.alpha, r.seed)?;
            degree_total += instance.supergraph().avg_degree();
            encountered_total += encountered as f64;
            encountered_max = encountered_max.max(encountered);
        }
        let trials = group.len();
        let avg_degree_mean = degree_total / trials as f64;
        let encountered_mean = encountered_total / trials as f64;
        let bound = scale * avg_degree_mean;
        rows.push(BoundRow {
            states,
            p: spec.p,
            algorithm: label.to_string(),
            trials,
            encountered_mean,
            encountered_max,
            avg_degree_mean,
            c_bar,
            epsilon,
            bound,
            pass: encountered_mean <= bound,
        });
    }
    if rows.is_empty() {
        return Err(Error::Input("no backward records match the configuration".into()));
    }
    Ok(rows)
}

pub fn write_bounds<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}
