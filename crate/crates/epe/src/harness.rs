//! Sweep runner.
//!
//! Every `(S, trial)` cell draws one instance from
//! `derive(derive(master, "instance", S), "trial", trial)` and runs each
//! configured algorithm on it with streams derived from that instance seed
//! and the algorithm label, so records do not depend on scheduling. Records
//! are sorted by `(S, p, algorithm, seed)` before writing.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use epe_core::backward::{backward_epe, BackwardParams};
use epe_core::baselines::{approx_contributions, backward_epe_alternative};
use epe_core::bidirectional::{bidirectional_epe, plug_in_estimate, BidirectionalConfig, Termination};
use epe_core::forward::{forward_epe, ForwardConfig};
use epe_core::instance_gen::generate_instance;
use epe_core::{streams, CountingSampler, EstimateReport, ProblemInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmConfig, AlgorithmSpec, ExperimentConfig};
use crate::error::{io_error, Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "EPE_THREADS";

pub const CSV_HEADER: &str = "S,p,algorithm,seed,samples_used,linf_error,mean_relative_error,zero_value_states,encountered_size,iterations,wall_time_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "S")]
    pub states: usize,
    pub p: f64,
    pub algorithm: String,
    /// Instance seed; regenerates the instance together with the config.
    pub seed: u64,
    pub samples_used: u64,
    pub linf_error: f64,
    /// Mean of `|v̂(s) - v(s)|/v(s)` over states with `v(s) > 0`.
    pub mean_relative_error: f64,
    pub zero_value_states: usize,
    pub encountered_size: Option<usize>,
    pub iterations: u64,
    /// 0 unless timing is enabled.
    pub wall_time_ms: u64,
}

pub fn instance_seed(master: u64, states: usize, trial: u32) -> u64 {
    streams::derive_seed(
        streams::derive_seed(master, "instance", states as u64),
        "trial",
        u64::from(trial),
    )
}

/// Runs one algorithm on `instance` with a fresh sampler seeded by
/// `sampler_seed` and an algorithm stream seeded by `rng_seed`.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    instance: &ProblemInstance,
    sampler_seed: u64,
    rng_seed: u64,
    trace: bool,
) -> Result<EstimateReport> {
    let states = instance.states();
    let alpha = instance.alpha();
    let cost = instance.cost();
    let neighbors = instance.supergraph().all_in_neighbors();
    let mut sampler = CountingSampler::new(instance, sampler_seed);
    let mut rng = streams::seeded(rng_seed);
    let report = match spec {
        AlgorithmSpec::Forward { horizon, trajectories } => {
            let config = ForwardConfig {
                horizon: horizon.count(states)?,
                trajectories: trajectories.count(states)?,
            };
            forward_epe(&mut sampler, cost, alpha, config)?
        }
        AlgorithmSpec::Backward { epsilon, n } => {
            let params = BackwardParams {
                epsilon: epsilon.positive(states)?,
                n: n.count(states)?,
                trace,
            };
            backward_epe(&mut sampler, &mut rng, cost, alpha, neighbors, params)?.report
        }
        AlgorithmSpec::Bidirectional {
            n_backward,
            n_forward,
            epsilon,
        } => {
            let termination = match epsilon {
                Some(e) => Termination::Fixed {
                    epsilon: e.positive(states)?,
                },
                None => Termination::Dynamic,
            };
            let config = BidirectionalConfig {
                n_backward: n_backward.count(states)?,
                n_forward: n_forward.count(states)?,
                termination,
            };
            bidirectional_epe(&mut sampler, &mut rng, cost, alpha, neighbors, config)?.report
        }
        AlgorithmSpec::ApproxContributions { epsilon } => {
            approx_contributions(instance.q(), cost, alpha, epsilon.positive(states)?, &mut rng, trace)?
        }
        AlgorithmSpec::BackwardAlternative { epsilon, n } => backward_epe_alternative(
            &mut sampler,
            &mut rng,
            cost,
            alpha,
            neighbors,
            epsilon.positive(states)?,
            n.count(states)?,
            trace,
        )?,
        AlgorithmSpec::PlugIn { n } => plug_in_estimate(&mut sampler, cost, alpha, n.count(states)?)?,
    };
    if report.samples_used != sampler.draw_count() {
        return Err(Error::Input(format!(
            "{} reported {} samples but drew {}",
            spec.name(),
            report.samples_used,
            sampler.draw_count()
        )));
    }
    Ok(report)
}

/// `(‖v̂ - v‖_∞, mean relative error over v > 0, #{s : v(s) = 0})`.
pub fn error_metrics(estimate: &[f64], exact: &[f64]) -> (f64, f64, usize) {
    let mut linf = 0.0f64;
    let mut relative = 0.0;
    let mut zero = 0;
    for (e, v) in estimate.iter().zip(exact) {
        let diff = (e - v).abs();
        linf = linf.max(diff);
        if *v > 0.0 {
            relative += diff / v;
        } else {
            zero += 1;
        }
    }
    let counted = exact.len() - zero;
    let mean = if counted > 0 {
        relative / counted as f64
    } else {
        f64::NAN
    };
    (linf, mean, zero)
}

fn run_cell(config: &ExperimentConfig, states: usize, trial: u32) -> Result<Vec<TrialRecord>> {
    let spec = config.ensemble(states)?;
    let seed = instance_seed(config.master_seed, states, trial);
    let instance = generate_instance(&spec, config.alpha, seed)?;
    let exact = instance.exact_value();
    config
        .algorithms
        .iter()
        .map(|algorithm| run_trial(config, algorithm, &instance, &exact, spec.p, seed))
        .collect()
}

fn run_trial(
    config: &ExperimentConfig,
    algorithm: &AlgorithmConfig,
    instance: &ProblemInstance,
    exact: &[f64],
    p: f64,
    seed: u64,
) -> Result<TrialRecord> {
    let label = algorithm.label();
    let sampler_seed = streams::derive_seed(seed, &format!("sampler:{label}"), 0);
    let rng_seed = streams::derive_seed(seed, &format!("rng:{label}"), 0);
    let start = Instant::now();
    let report = run_algorithm(&algorithm.spec, instance, sampler_seed, rng_seed, false)?;
    let elapsed = start.elapsed().as_millis() as u64;
    let (linf_error, mean_relative_error, zero_value_states) = error_metrics(&report.estimate, exact);
    Ok(TrialRecord {
        states: instance.states(),
        p,
        algorithm: label.to_string(),
        seed,
        samples_used: report.samples_used,
        linf_error,
        mean_relative_error,
        zero_value_states,
        encountered_size: report.encountered_size,
        iterations: report.iterations,
        wall_time_ms: if config.timing { elapsed } else { 0 },
    })
}

/// Worker count from `EPE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.states
            .cmp(&b.states)
            .then(a.p.total_cmp(&b.p))
            .then_with(|| a.algorithm.cmp(&b.algorithm))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Runs every `(S, trial, algorithm)` triple on at most `threads` workers
/// and returns the records in canonical order.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let cells: Vec<(usize, u32)> = config
        .states
        .iter()
        .flat_map(|&s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let nested: Vec<Vec<TrialRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, t)| run_cell(config, s, t))
            .collect::<Result<_>>()
    })?;
    let mut records: Vec<TrialRecord> = nested.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

pub fn write_records<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if records.is_empty() {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Input(format!("unexpected CSV header {:?}", header.join(","))));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_records_file(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    write_records(records, std::io::BufWriter::new(file))
}

pub fn read_records_file(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_records(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_skip_zero_values() {
        let (linf, rel, zero) = error_metrics(&[1.1, 0.5, 0.0], &[1.0, 0.0, 0.5]);
        assert!((linf - 0.5).abs() < 1e-15);
        assert!((rel - (0.1 + 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(zero, 1);
        assert!(error_metrics(&[0.0], &[0.0]).1.is_nan());
    }

    #[test]
    fn header_matches_serialized_fields() {
        let mut out = Vec::new();
        let record = TrialRecord {
            states: 3,
            p: 2.0,
            algorithm: "backward".into(),
            seed: 9,
            samples_used: 4,
            linf_error: 0.25,
            mean_relative_error: 0.5,
            zero_value_states: 0,
            encountered_size: None,
            iterations: 2,
            wall_time_ms: 0,
        };
        write_records(std::slice::from_ref(&record), &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records(&out[..]).unwrap(), vec![record]);
    }
}
