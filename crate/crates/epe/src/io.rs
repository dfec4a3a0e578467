//! File formats.
//!
//! Instances are JSON objects `{"S", "alpha", "cost", "Q", "supergraph"}`
//! with 0-based state indices; `supergraph` lists each state's out-edges.
//! Floats are written in shortest round-trip form, so a write/read cycle is
//! bit-exact.
//!
//! Push traces are JSON lines: a header `{"alpha", "cost"}` followed by one
//! `{"k", "state", "residual", "column"}` record per push, where `column`
//! holds the `[s, Q̂(s, s_k)]` pairs the push applied.

use std::io::{BufRead, Write};
use std::path::Path;

use epe_core::{DenseMatrix, ProblemInstance, PushStep, PushTrace, Supergraph};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(rename = "S")]
    pub states: usize,
    pub alpha: f64,
    pub cost: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub supergraph: Vec<Vec<usize>>,
}

impl InstanceFile {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self {
            states: instance.states(),
            alpha: instance.alpha(),
            cost: instance.cost().to_vec(),
            q: instance.q().to_rows(),
            supergraph: instance.supergraph().out_edges().to_vec(),
        }
    }

    /// Builds and validates the instance.
    pub fn into_instance(self) -> Result<ProblemInstance> {
        if self.cost.len() != self.states || self.q.len() != self.states || self.supergraph.len() != self.states {
            return Err(Error::Input(format!(
                "S = {} but cost, Q and supergraph have {}, {} and {} rows",
                self.states,
                self.cost.len(),
                self.q.len(),
                self.supergraph.len()
            )));
        }
        let q = DenseMatrix::from_rows(&self.q)?;
        let graph = Supergraph::from_out_edges(self.states, self.supergraph)?;
        Ok(ProblemInstance::new(self.alpha, self.cost, q, graph)?)
    }
}

pub fn instance_to_json(instance: &ProblemInstance) -> Result<String> {
    Ok(serde_json::to_string(&InstanceFile::from_instance(instance))?)
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn write_instance(path: &Path, instance: &ProblemInstance) -> Result<()> {
    std::fs::write(path, instance_to_json(instance)?).map_err(|e| io_error(path, e))
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    instance_from_json(&text)
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    alpha: f64,
    cost: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    k: usize,
    state: usize,
    residual: f64,
    column: Vec<(usize, f64)>,
}

pub fn write_trace<W: Write>(trace: &PushTrace, mut out: W) -> Result<()> {
    let header = TraceHeader {
        alpha: trace.alpha(),
        cost: trace.cost().to_vec(),
    };
    let io = |e| Error::Io {
        path: "<trace>".into(),
        source: e,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    for (k, step) in trace.steps().iter().enumerate() {
        let record = TraceRecord {
            k: k + 1,
            state: step.state,
            residual: step.residual,
            column: step.column.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_trace<R: BufRead>(input: R) -> Result<PushTrace> {
    let mut lines = input.lines();
    let io = |e| Error::Io {
        path: "<trace>".into(),
        source: e,
    };
    let header: TraceHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line.map_err(io)?)?,
        None => return Err(Error::Input("empty trace".into())),
    };
    let mut steps = Vec::new();
    for line in lines {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)?;
        if record.k != steps.len() + 1 {
            return Err(Error::Input(format!("trace record {} out of order", record.k)));
        }
        if record.state >= header.cost.len() || record.column.iter().any(|&(s, _)| s >= header.cost.len()) {
            return Err(Error::Input(format!(
                "trace record {} names an unknown state",
                record.k
            )));
        }
        steps.push(PushStep {
            state: record.state,
            residual: record.residual,
            column: record.column,
        });
    }
    Ok(PushTrace::new(header.alpha, header.cost, steps))
}
