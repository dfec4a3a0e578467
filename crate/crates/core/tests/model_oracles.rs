mod common;

use common::{instance, max_abs_diff, random_instance};
use epe_core::forward::{forward_epe, ForwardConfig};
use epe_core::linalg::norm_inf;
use epe_core::CountingSampler;
use proptest::prelude::*;

proptest! {
    #[test]
    fn power_series_within_truncation_bound(seed in 0u64..10_000, alpha in 0.05f64..0.95) {
        let inst = random_instance(seed, 20, alpha);
        let exact = inst.exact_value();
        let c_inf = inst.cost_inf();
        for horizon in 1..=50 {
            let series = inst.exact_value_power_series(horizon).unwrap();
            let bound = c_inf * alpha.powi(horizon as i32);
            prop_assert!(max_abs_diff(&exact, &series) <= bound + 1e-12);
        }
    }

    #[test]
    fn exact_value_is_a_convex_combination_of_costs(seed in 0u64..10_000, alpha in 0.05f64..0.95) {
        let inst = random_instance(seed, 20, alpha);
        let c_inf = inst.cost_inf();
        for v in inst.exact_value() {
            prop_assert!(v >= -1e-12 && v <= c_inf + 1e-12);
        }
    }

    #[test]
    fn generated_instances_are_valid(seed in 0u64..10_000) {
        let inst = random_instance(seed, 30, 0.7);
        prop_assert!(inst.validate().is_empty());
        for s in 0..inst.states() {
            for t in 0..inst.states() {
                prop_assert_eq!(inst.supergraph().has_edge(s, t), inst.q().get(s, t) > 0.0);
            }
        }
    }
}

#[test]
fn empirical_frequencies_match_rows() {
    let inst = instance(
        0.5,
        &[1.0, 0.0, 0.5],
        &[&[0.2, 0.3, 0.5], &[0.0, 0.9, 0.1], &[0.6, 0.0, 0.4]],
    );
    let mut sampler = CountingSampler::new(&inst, 42);
    for s in 0..3 {
        let mut counts = [0u32; 3];
        for _ in 0..100_000 {
            counts[sampler.sample_next(s).unwrap()] += 1;
        }
        for (t, &count) in counts.iter().enumerate() {
            let freq = f64::from(count) / 1e5;
            assert!((freq - inst.q().get(s, t)).abs() <= 0.01, "({s},{t}) freq {freq}");
        }
    }
    assert_eq!(sampler.draw_count(), 300_000);
}

#[test]
fn forward_mean_is_the_truncated_value() {
    let inst = instance(
        0.8,
        &[1.0, 0.0, 0.5],
        &[&[0.2, 0.3, 0.5], &[0.0, 0.9, 0.1], &[0.6, 0.0, 0.4]],
    );
    let horizon = 5;
    let m = 100_000;
    let mut sampler = CountingSampler::new(&inst, 7);
    let report = forward_epe(
        &mut sampler,
        inst.cost(),
        0.8,
        ForwardConfig {
            horizon,
            trajectories: m,
        },
    )
    .unwrap();
    assert_eq!(report.samples_used, 3 * u64::from(m) * u64::from(horizon - 1));
    assert_eq!(report.samples_used, sampler.draw_count());
    let truth = inst.exact_value_power_series(horizon as usize).unwrap();
    // Path values lie in [0, ‖c‖_∞], so each has standard deviation at most ‖c‖_∞/2.
    let sigma = norm_inf(inst.cost()) / 2.0 / f64::from(m).sqrt();
    for (s, (e, t)) in report.estimate.iter().zip(&truth).enumerate() {
        assert!((e - t).abs() <= 3.0 * sigma, "state {s}");
    }
}

#[test]
fn forward_bias_on_point_mass_chain() {
    let inst = instance(0.7, &[1.0, 0.2], &[&[0.0, 1.0], &[1.0, 0.0]]);
    let exact = inst.exact_value();
    for horizon in [1u32, 3, 8, 20] {
        let mut sampler = CountingSampler::new(&inst, 0);
        let r = forward_epe(
            &mut sampler,
            inst.cost(),
            0.7,
            ForwardConfig {
                horizon,
                trajectories: 2,
            },
        )
        .unwrap();
        let bound = 0.7f64.powi(horizon as i32);
        assert!(max_abs_diff(&r.estimate, &exact) <= bound + 1e-12);
    }
}
