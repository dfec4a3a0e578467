//! Per-`(S, algorithm)` aggregates of trial records.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    #[serde(rename = "S")]
    pub states: usize,
    pub algorithm: String,
    pub trials: usize,
    pub samples_mean: f64,
    pub samples_std: f64,
    pub linf_error_mean: f64,
    pub linf_error_std: f64,
    pub relative_error_mean: f64,
    pub relative_error_std: f64,
    pub encountered_mean: Option<f64>,
    /// Mean backward samples over mean forward samples at this `S`; set on
    /// every row of `S` when both algorithms ran there.
    pub backward_forward_ratio: Option<f64>,
    /// Least-squares slope of `ln(mean samples)` against `ln S` for this
    /// algorithm; needs two or more sizes with positive means.
    pub loglog_slope: Option<f64>,
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Input("no records to summarize".into()));
    }
    let mut cells: BTreeMap<(usize, &str), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.states, r.algorithm.as_str())).or_default().push(r);
    }

    let mut rows: Vec<SummaryRow> = cells
        .iter()
        .map(|(&(states, algorithm), group)| {
            let pick = |f: fn(&TrialRecord) -> f64| -> Vec<f64> {
                group.iter().map(|r| f(r)).filter(|v| !v.is_nan()).collect()
            };
            let (samples_mean, samples_std) = mean_std(&pick(|r| r.samples_used as f64));
            let (linf_error_mean, linf_error_std) = mean_std(&pick(|r| r.linf_error));
            let (relative_error_mean, relative_error_std) = mean_std(&pick(|r| r.mean_relative_error));
            let encountered: Vec<f64> = group
                .iter()
                .filter_map(|r| r.encountered_size)
                .map(|u| u as f64)
                .collect();
            SummaryRow {
                states,
                algorithm: algorithm.to_string(),
                trials: group.len(),
                samples_mean,
                samples_std,
                linf_error_mean,
                linf_error_std,
                relative_error_mean,
                relative_error_std,
                encountered_mean: (!encountered.is_empty()).then(|| mean_std(&encountered).0),
                backward_forward_ratio: None,
                loglog_slope: None,
            }
        })
        .collect();

    let mean_of = |rows: &[SummaryRow], states: usize, algorithm: &str| {
        rows.iter()
            .find(|r| r.states == states && r.algorithm == algorithm)
            .map(|r| r.samples_mean)
    };
    let sizes: BTreeSet<usize> = rows.iter().map(|r| r.states).collect();
    for &s in &sizes {
        if let (Some(b), Some(f)) = (mean_of(&rows, s, "backward"), mean_of(&rows, s, "forward")) {
            for row in rows.iter_mut().filter(|r| r.states == s) {
                row.backward_forward_ratio = Some(b / f);
            }
        }
    }
    let algorithms: BTreeSet<String> = rows.iter().map(|r| r.algorithm.clone()).collect();
    for a in &algorithms {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.algorithm == a)
            .map(|r| (r.states as f64, r.samples_mean))
            .collect();
        let slope = loglog_slope(&points);
        for row in rows.iter_mut().filter(|r| &r.algorithm == a) {
            row.loglog_slope = slope;
        }
    }
    Ok(rows)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}
