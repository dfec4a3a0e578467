//! Experiment configuration.
//!
//! A sweep is one ensemble family evaluated at several sizes `S`; algorithm
//! parameters may depend on `S` through [`Scalar`]. Counts are rounded up.

use std::path::Path;

use epe_core::instance_gen::{CaseRule, CostModel, EnsembleSpec};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};

/// Master seed pinned by the shipped presets.
pub const DEFAULT_MASTER_SEED: u64 = 20_190_611;

/// A parameter that is either fixed or scales with `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Fixed(f64),
    TimesS {
        #[serde(rename = "times_S")]
        times_s: f64,
    },
    TimesSqrtS {
        #[serde(rename = "times_sqrt_S")]
        times_sqrt_s: f64,
    },
    OverS {
        #[serde(rename = "over_S")]
        over_s: f64,
    },
}

impl Scalar {
    pub fn value(&self, states: usize) -> f64 {
        let s = states as f64;
        match *self {
            Self::Fixed(x) => x,
            Self::TimesS { times_s } => times_s * s,
            Self::TimesSqrtS { times_sqrt_s } => times_sqrt_s * s.sqrt(),
            Self::OverS { over_s } => over_s / s,
        }
    }

    /// `⌈value⌉`, ignoring rounding noise below 1e-9.
    pub fn count(&self, states: usize) -> Result<u32> {
        let x = self.value(states);
        let c = (x - 1e-9).ceil();
        if !(c >= 1.0 && c <= f64::from(u32::MAX)) {
            return Err(Error::Config(format!(
                "count {x} at S = {states} is not a positive integer"
            )));
        }
        Ok(c as u32)
    }

    pub fn positive(&self, states: usize) -> Result<f64> {
        let x = self.value(states);
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Config(format!("value {x} at S = {states} must be positive")));
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DensityRule {
    Constant { p: f64 },
    FourthRoot,
    SquareRoot,
}

impl DensityRule {
    pub fn case_rule(&self) -> CaseRule {
        match *self {
            Self::Constant { p } => CaseRule::Constant(p),
            Self::FourthRoot => CaseRule::FourthRoot,
            Self::SquareRoot => CaseRule::SquareRoot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CostConfig {
    Mixed,
    Binary { ones: usize },
}

impl CostConfig {
    pub fn cost_model(&self) -> CostModel {
        match *self {
            Self::Mixed => CostModel::Mixed,
            Self::Binary { ones } => CostModel::Binary { ones },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Forward {
        horizon: Scalar,
        trajectories: Scalar,
    },
    Backward {
        epsilon: Scalar,
        n: Scalar,
    },
    /// Fixed threshold when `epsilon` is given, size-triggered otherwise.
    Bidirectional {
        n_backward: Scalar,
        n_forward: Scalar,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<Scalar>,
    },
    ApproxContributions {
        epsilon: Scalar,
    },
    BackwardAlternative {
        epsilon: Scalar,
        n: Scalar,
    },
    PlugIn {
        n: Scalar,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Forward { .. } => "forward",
            Self::Backward { .. } => "backward",
            Self::Bidirectional { .. } => "bidirectional",
            Self::ApproxContributions { .. } => "approx_contributions",
            Self::BackwardAlternative { .. } => "backward_alternative",
            Self::PlugIn { .. } => "plug_in",
        }
    }

    /// Resolves every parameter at `S`, reporting the first invalid one.
    pub fn check(&self, states: usize) -> Result<()> {
        match self {
            Self::Forward { horizon, trajectories } => {
                horizon.count(states)?;
                trajectories.count(states)?;
            }
            Self::Backward { epsilon, n } | Self::BackwardAlternative { epsilon, n } => {
                epsilon.positive(states)?;
                n.count(states)?;
            }
            Self::Bidirectional {
                n_backward,
                n_forward,
                epsilon,
            } => {
                n_backward.count(states)?;
                n_forward.count(states)?;
                if let Some(e) = epsilon {
                    e.positive(states)?;
                }
            }
            Self::ApproxContributions { epsilon } => {
                epsilon.positive(states)?;
            }
            Self::PlugIn { n } => {
                n.count(states)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// Name written to the CSV; defaults to the algorithm name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub spec: AlgorithmSpec,
}

impl AlgorithmConfig {
    pub fn new(spec: AlgorithmSpec) -> Self {
        Self { label: None, spec }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.spec.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub master_seed: u64,
    pub alpha: f64,
    pub trials: u32,
    pub states: Vec<usize>,
    pub density: DensityRule,
    pub cost: CostConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Record wall-clock times; off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0,1)".into()));
        }
        if self.states.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("need at least one size and one algorithm".into()));
        }
        let mut labels: Vec<&str> = self.algorithms.iter().map(|a| a.label()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("algorithm labels must be distinct".into()));
        }
        for &s in &self.states {
            self.ensemble(s)?;
            for a in &self.algorithms {
                a.spec
                    .check(s)
                    .map_err(|e| Error::Config(format!("{}: {e}", a.label())))?;
            }
        }
        Ok(())
    }

    pub fn ensemble(&self, states: usize) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec::from_case(
            states,
            self.density.case_rule(),
            self.cost.cost_model(),
        )?)
    }

    /// Shipped presets: `fig1`, `fig1-alt`, `fig1-case2`, `fig1-case3`, `fig2`.
    pub fn preset(name: &str) -> Option<Self> {
        let fig1 = |alpha: f64, density: DensityRule, name: &str| Self {
            name: Some(name.into()),
            master_seed: DEFAULT_MASTER_SEED,
            alpha,
            trials: 100,
            states: vec![100, 200, 400, 800, 1600],
            density,
            cost: CostConfig::Mixed,
            algorithms: vec![
                AlgorithmConfig::new(AlgorithmSpec::Backward {
                    epsilon: Scalar::Fixed(0.15),
                    n: Scalar::Fixed(20.0),
                }),
                AlgorithmConfig::new(AlgorithmSpec::Forward {
                    horizon: Scalar::Fixed(10.0),
                    trajectories: Scalar::Fixed(4.0),
                }),
            ],
            output: None,
            timing: false,
        };
        match name {
            "fig1" => Some(fig1(0.9, DensityRule::Constant { p: 10.0 }, name)),
            "fig1-alt" => Some(fig1(0.1, DensityRule::Constant { p: 10.0 }, name)),
            "fig1-case2" => Some(fig1(0.9, DensityRule::FourthRoot, name)),
            "fig1-case3" => Some(fig1(0.9, DensityRule::SquareRoot, name)),
            "fig2" => Some(Self {
                name: Some(name.into()),
                master_seed: DEFAULT_MASTER_SEED,
                alpha: 0.9,
                trials: 100,
                states: vec![100, 200, 400, 800, 1600, 3200],
                density: DensityRule::Constant { p: 10.0 },
                cost: CostConfig::Mixed,
                algorithms: vec![
                    AlgorithmConfig::new(AlgorithmSpec::Forward {
                        horizon: Scalar::Fixed(15.0),
                        trajectories: Scalar::TimesS { times_s: 0.05 },
                    }),
                    AlgorithmConfig::new(AlgorithmSpec::Backward {
                        epsilon: Scalar::OverS { over_s: 10.0 },
                        n: Scalar::TimesS { times_s: 1.0 },
                    }),
                    AlgorithmConfig::new(AlgorithmSpec::Bidirectional {
                        n_backward: Scalar::TimesS { times_s: 1.0 },
                        n_forward: Scalar::TimesSqrtS { times_sqrt_s: 1.5 },
                        epsilon: None,
                    }),
                ],
                output: None,
                timing: false,
            }),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 5] = ["fig1", "fig1-alt", "fig1-case2", "fig1-case3", "fig2"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_resolve() {
        assert_eq!(Scalar::TimesS { times_s: 0.05 }.count(100).unwrap(), 5);
        assert_eq!(Scalar::TimesS { times_s: 0.05 }.count(110).unwrap(), 6);
        assert_eq!(Scalar::TimesSqrtS { times_sqrt_s: 1.5 }.count(100).unwrap(), 15);
        assert_eq!(Scalar::TimesSqrtS { times_sqrt_s: 1.5 }.count(200).unwrap(), 22);
        assert_eq!(Scalar::OverS { over_s: 10.0 }.value(400), 0.025);
        assert!(Scalar::Fixed(0.0).count(10).is_err());
    }

    #[test]
    fn scalar_json_forms() {
        let parse = |s: &str| serde_json::from_str::<Scalar>(s).unwrap();
        assert_eq!(parse("3"), Scalar::Fixed(3.0));
        assert_eq!(parse(r#"{"times_S": 2}"#), Scalar::TimesS { times_s: 2.0 });
        assert_eq!(
            parse(r#"{"times_sqrt_S": 1.5}"#),
            Scalar::TimesSqrtS { times_sqrt_s: 1.5 }
        );
        assert_eq!(parse(r#"{"over_S": 10}"#), Scalar::OverS { over_s: 10.0 });
    }

    #[test]
    fn presets_round_trip_and_validate() {
        for name in ExperimentConfig::PRESETS {
            let preset = ExperimentConfig::preset(name).unwrap();
            preset.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json(&preset.to_json().unwrap()).unwrap(), preset);
        }
        assert!(ExperimentConfig::preset("nope").is_none());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::preset("fig1").unwrap();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset("fig1").unwrap();
        c.states = vec![5];
        assert!(c.validate().is_err(), "p = 10 exceeds S = 5");
        let mut c = ExperimentConfig::preset("fig1").unwrap();
        c.algorithms.push(c.algorithms[0].clone());
        assert!(c.validate().is_err(), "duplicate labels");
    }
}
