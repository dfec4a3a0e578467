#![allow(dead_code)]

use epe_core::instance_gen::{generate_instance, CostModel, EnsembleSpec};
use epe_core::{DenseMatrix, ProblemInstance, Supergraph};

/// A generated instance with `S ∈ [2, max_states]` picked from `seed`.
pub fn random_instance(seed: u64, max_states: usize, alpha: f64) -> ProblemInstance {
    let states = 2 + (seed as usize * 7919) % (max_states - 1);
    let s = states as f64;
    // Whole-mask resampling needs every row nonempty at once: keep S·e^{-p} small.
    let p_min = (s.ln() + 3.0).min(s);
    let p = p_min + ((seed % 5) as f64 / 4.0) * (s - p_min);
    let cost_model = if seed.is_multiple_of(3) {
        CostModel::Binary {
            ones: 1 + (seed as usize) % states,
        }
    } else {
        CostModel::Mixed
    };
    let spec = EnsembleSpec::new(states, p, cost_model).unwrap();
    generate_instance(&spec, alpha, seed).unwrap()
}

pub fn dense(rows: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn instance(alpha: f64, cost: &[f64], rows: &[&[f64]]) -> ProblemInstance {
    let q = dense(rows);
    let graph = Supergraph::from_support(&q);
    ProblemInstance::new(alpha, cost.to_vec(), q, graph).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
