use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use epe::config::{AlgorithmSpec, ExperimentConfig};
use epe::{bounds, harness, io, summary};
use epe_core::backward::sample_size_backward;
use epe_core::bidirectional::{sample_size_backward_bd, sample_size_forward_bd};
use epe_core::forward::sample_size_forward;
use epe_core::instance_gen::{generate_instance, CaseRule, CostModel, EnsembleSpec};
use epe_core::streams;

#[derive(Parser)]
#[command(name = "epe", version, about = "Policy evaluation from sampled transitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Mixed,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Generate {
        #[arg(long = "states", short = 'S')]
        states: usize,
        /// Density p; defaults to 10 (or S when S < 10) unless --case is given.
        #[arg(long, conflicts_with = "case")]
        p: Option<f64>,
        /// Density rule: 1 (p = 10), 2 (p = (100 S)^(1/4)) or 3 (p = sqrt S).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        case: Option<u8>,
        #[arg(long, value_enum, default_value = "mixed")]
        cost: CostArg,
        /// Number of unit costs for --cost binary.
        #[arg(long, default_value_t = 1)]
        ones: usize,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a sweep and write its trial records as CSV.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// fig1, fig1-alt, fig1-case2, fig1-case3 or fig2.
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Output CSV; falls back to the config's output, then stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Record wall-clock times (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Aggregate trial records per (S, algorithm).
    Summarize {
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare encountered-set sizes with their expectation bound.
    Bounds {
        input: PathBuf,
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the sample-size formulas for the given tolerances.
    Calc {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        c_inf: f64,
        #[arg(long = "states", short = 'S', default_value_t = 10)]
        states: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon_rel: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon_abs: f64,
        /// Smallest positive transition probability; n_B is skipped without it.
        #[arg(long)]
        q_min: Option<f64>,
    },
    /// Run one algorithm on an instance file and print the estimate as JSON.
    Estimate {
        instance: PathBuf,
        /// Algorithm block, e.g. '{"name":"backward","epsilon":0.1,"n":20}'.
        #[arg(long)]
        algorithm: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the push trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn load_config(config: Option<PathBuf>, preset: Option<String>) -> Result<ExperimentConfig> {
    match (config, preset) {
        (Some(path), _) => Ok(ExperimentConfig::load(&path)?),
        (None, Some(name)) => ExperimentConfig::preset(&name)
            .with_context(|| format!("unknown preset {name:?}; known: {:?}", ExperimentConfig::PRESETS)),
        (None, None) => bail!("need --config or --preset"),
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            states,
            p,
            case,
            cost,
            ones,
            alpha,
            seed,
            out,
        } => {
            let rule = match (p, case) {
                (Some(p), _) => CaseRule::Constant(p),
                (None, Some(2)) => CaseRule::FourthRoot,
                (None, Some(3)) => CaseRule::SquareRoot,
                _ => CaseRule::Constant(10f64.min(states as f64)),
            };
            let model = match cost {
                CostArg::Mixed => CostModel::Mixed,
                CostArg::Binary => CostModel::Binary { ones },
            };
            let spec = EnsembleSpec::from_case(states, rule, model)?;
            let instance = generate_instance(&spec, alpha, seed)?;
            let mut w = output(out.as_ref())?;
            writeln!(w, "{}", io::instance_to_json(&instance)?)?;
            w.flush()?;
        }
        Command::Run {
            config,
            preset,
            seed,
            trials,
            out,
            timing,
        } => {
            let mut config = load_config(config, preset)?;
            if let Some(s) = seed {
                config.master_seed = s;
            }
            if let Some(t) = trials {
                config.trials = t;
            }
            config.timing |= timing;
            let records = harness::run_experiment(&config, harness::threads_from_env()?)?;
            let target = out.or_else(|| config.output.as_ref().map(PathBuf::from));
            harness::write_records(&records, output(target.as_ref())?)?;
        }
        Command::Summarize { input, out } => {
            let rows = summary::summarize(&harness::read_records_file(&input)?)?;
            summary::write_summary(&rows, output(out.as_ref())?)?;
        }
        Command::Bounds {
            input,
            config,
            preset,
            out,
        } => {
            let config = load_config(config, preset)?;
            let rows = bounds::bound_report(&harness::read_records_file(&input)?, &config)?;
            bounds::write_bounds(&rows, output(out.as_ref())?)?;
        }
        Command::Calc {
            epsilon,
            delta,
            alpha,
            c_inf,
            states,
            epsilon_rel,
            epsilon_abs,
            q_min,
        } => {
            let n_star = sample_size_backward(epsilon, delta, alpha, c_inf, states)?;
            let fwd = sample_size_forward(epsilon, delta, alpha, c_inf, states)?;
            let n_f = sample_size_forward_bd(epsilon, epsilon_rel, epsilon_abs, delta, states)?;
            let n_b = q_min
                .map(|q| sample_size_backward_bd(epsilon_rel, epsilon_abs, delta, alpha, c_inf, states, q))
                .transpose()?;
            let report = serde_json::json!({
                "n_star": n_star,
                "forward_T": fwd.horizon,
                "forward_m": fwd.trajectories,
                "n_F_star": n_f,
                "n_B_star": n_b,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Estimate {
            instance,
            algorithm,
            seed,
            trace,
        } => {
            let instance = io::read_instance(&instance)?;
            let spec: AlgorithmSpec = serde_json::from_str(&algorithm).context("parsing --algorithm")?;
            spec.check(instance.states())?;
            let report = harness::run_algorithm(
                &spec,
                &instance,
                streams::derive_seed(seed, "sampler", 0),
                streams::derive_seed(seed, "rng", 0),
                trace.is_some(),
            )?;
            if let Some(path) = trace {
                let Some(t) = report.trace.as_ref() else {
                    bail!("{} does not record a push trace", spec.name());
                };
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                io::write_trace(t, std::io::BufWriter::new(file))?;
            }
            let exact = instance.exact_value();
            let (linf, rel, _) = harness::error_metrics(&report.estimate, &exact);
            let out = serde_json::json!({
                "algorithm": spec.name(),
                "estimate": report.estimate,
                "exact": exact,
                "samples_used": report.samples_used,
                "iterations": report.iterations,
                "encountered_size": report.encountered_size,
                "linf_error": linf,
                "mean_relative_error": rel,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
