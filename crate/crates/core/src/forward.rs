//! Forward Monte Carlo: average truncated discounted cost over `m`
//! trajectories of `T` states started from every state.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::report::EstimateReport;
use crate::sampler::CountingSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardConfig {
    /// States per trajectory, counting the start; `T - 1` draws each.
    pub horizon: u32,
    /// Trajectories per state.
    pub trajectories: u32,
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.trajectories == 0 {
            return Err(invalid("trajectory length T and count m must be at least 1"));
        }
        Ok(())
    }
}

/// `v̂(s) = (1/m) Σ_i (1-α) Σ_{t<T} α^t c(W_t)` with `W_0 = s`.
///
/// Only transitions are charged, so a run costs exactly `S m (T-1)` draws.
pub fn forward_epe(
    sampler: &mut CountingSampler<'_>,
    cost: &[f64],
    alpha: f64,
    config: ForwardConfig,
) -> Result<EstimateReport> {
    config.validate()?;
    let states = sampler.states();
    if cost.len() != states {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} costs for {states} states",
            cost.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0,1)"));
    }
    let start = sampler.draw_count();
    let m = f64::from(config.trajectories);
    let mut estimate = Vec::with_capacity(states);
    for s in 0..states {
        let mut total = 0.0;
        for _ in 0..config.trajectories {
            let mut state = s;
            let mut weight = 1.0 - alpha;
            let mut path = weight * cost[state];
            for _ in 1..config.horizon {
                state = sampler.sample_next(state)?;
                weight *= alpha;
                path += weight * cost[state];
            }
            total += path;
        }
        estimate.push(total / m);
    }
    let samples_used = sampler.draw_count() - start;
    Ok(EstimateReport::new(
        estimate,
        samples_used,
        states as u64 * u64::from(config.trajectories),
    ))
}

/// `(T, m)` guaranteeing `P(‖v̂ - v‖_∞ ≥ 2ε) ≤ δ`:
/// `T = ⌈ln(2‖c‖_∞/ε)/(1-α)⌉` (at least 1) and
/// `m = ⌈‖c‖²_∞ α² / (2ε²(1-α)²) · ln(2ST/δ)⌉`.
pub fn sample_size_forward(epsilon: f64, delta: f64, alpha: f64, c_inf: f64, states: usize) -> Result<ForwardConfig> {
    if !(epsilon > 0.0 && delta > 0.0 && c_inf > 0.0) || states == 0 {
        return Err(invalid("epsilon, delta, ‖c‖_∞ and S must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0,1)"));
    }
    let horizon = libm::ceil(libm::log(2.0 * c_inf / epsilon) / (1.0 - alpha)).max(1.0);
    let scale = c_inf * c_inf * alpha * alpha / (2.0 * epsilon * epsilon * (1.0 - alpha) * (1.0 - alpha));
    let m = libm::ceil(scale * libm::log(2.0 * states as f64 * horizon / delta)).max(1.0);
    Ok(ForwardConfig {
        horizon: horizon as u32,
        trajectories: m as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::model::{ProblemInstance, Supergraph};
    use alloc::vec;

    #[test]
    fn horizon_one_is_immediate_cost() {
        let q = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let inst = ProblemInstance::new(0.25, vec![1.0, 0.4], q, Supergraph::complete(2)).unwrap();
        let mut sampler = CountingSampler::new(&inst, 0);
        let r = forward_epe(
            &mut sampler,
            inst.cost(),
            0.25,
            ForwardConfig {
                horizon: 1,
                trajectories: 9,
            },
        )
        .unwrap();
        assert_eq!(r.estimate, vec![0.75, 0.75 * 0.4]);
        assert_eq!(r.samples_used, 0);
    }

    #[test]
    fn point_mass_chain_partial_sum() {
        let q = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let inst = ProblemInstance::new(0.5, vec![1.0], q, Supergraph::complete(1)).unwrap();
        for horizon in [1, 2, 5, 12] {
            let mut sampler = CountingSampler::new(&inst, 0);
            let r = forward_epe(
                &mut sampler,
                inst.cost(),
                0.5,
                ForwardConfig {
                    horizon,
                    trajectories: 3,
                },
            )
            .unwrap();
            let expected = 1.0 - 0.5f64.powi(horizon as i32);
            assert!((r.estimate[0] - expected).abs() < 1e-15);
            assert_eq!(r.samples_used, 3 * u64::from(horizon - 1));
        }
    }

    #[test]
    fn sizing_reference_values() {
        let c = sample_size_forward(0.1, 0.1, 0.5, 1.0, 10).unwrap();
        assert_eq!(
            c,
            ForwardConfig {
                horizon: 6,
                trajectories: 355
            }
        );
        assert_eq!(sample_size_forward(2.5, 0.1, 0.5, 1.0, 10).unwrap().horizon, 1);
        let small = sample_size_forward(0.1, 0.1, 0.5, 1.0, 10).unwrap().trajectories;
        let big = sample_size_forward(0.1, 0.1, 0.5, 1.0, 1000).unwrap().trajectories;
        assert!(big >= small);
        assert!(sample_size_forward(0.1, 0.1, 1.5, 1.0, 10).is_err());
    }

    #[test]
    fn zero_config_rejected() {
        assert!(ForwardConfig {
            horizon: 0,
            trajectories: 1
        }
        .validate()
        .is_err());
        assert!(ForwardConfig {
            horizon: 1,
            trajectories: 0
        }
        .validate()
        .is_err());
    }
}
