use epe::config::{AlgorithmConfig, AlgorithmSpec, CostConfig, DensityRule, ExperimentConfig, Scalar};
use epe::harness::{read_records, run_experiment, write_records, CSV_HEADER};
use epe::summary::summarize;

fn config(algorithms: Vec<AlgorithmSpec>, states: Vec<usize>, trials: u32) -> ExperimentConfig {
    ExperimentConfig {
        name: None,
        master_seed: 99,
        alpha: 0.9,
        trials,
        states,
        density: DensityRule::Constant { p: 10.0 },
        cost: CostConfig::Mixed,
        algorithms: algorithms.into_iter().map(AlgorithmConfig::new).collect(),
        output: None,
        timing: false,
    }
}

#[test]
fn known_q_baseline_draws_nothing() {
    let c = config(
        vec![AlgorithmSpec::ApproxContributions {
            epsilon: Scalar::Fixed(0.1),
        }],
        vec![30],
        1,
    );
    let records = run_experiment(&c, Some(1)).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].samples_used, 0);
    assert!(records[0].linf_error <= 0.1);
}

#[test]
fn figure_one_cell_accounting() {
    let fig1 = ExperimentConfig::preset("fig1").unwrap();
    let mut c = fig1.clone();
    c.states = vec![100];
    c.trials = 10;
    let records = run_experiment(&c, None).unwrap();
    for r in &records {
        match r.algorithm.as_str() {
            "backward" => {
                assert!(r.samples_used <= 2000);
                assert_eq!(r.samples_used, 20 * r.encountered_size.unwrap() as u64);
            }
            "forward" => assert_eq!(r.samples_used, 3600),
            other => panic!("unexpected {other}"),
        }
    }
}

#[test]
fn records_are_canonical_and_independent_of_threads() {
    let c = config(
        vec![
            AlgorithmSpec::Forward {
                horizon: Scalar::Fixed(5.0),
                trajectories: Scalar::Fixed(2.0),
            },
            AlgorithmSpec::Backward {
                epsilon: Scalar::Fixed(0.2),
                n: Scalar::Fixed(5.0),
            },
            AlgorithmSpec::Bidirectional {
                n_backward: Scalar::TimesS { times_s: 0.2 },
                n_forward: Scalar::TimesSqrtS { times_sqrt_s: 1.5 },
                epsilon: None,
            },
            AlgorithmSpec::PlugIn { n: Scalar::Fixed(3.0) },
        ],
        vec![40, 20],
        4,
    );
    let one = run_experiment(&c, Some(1)).unwrap();
    let many = run_experiment(&c, Some(3)).unwrap();
    assert_eq!(one, many);
    assert_eq!(one.len(), 2 * 4 * 4);
    let keys: Vec<_> = one.iter().map(|r| (r.states, r.algorithm.clone(), r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let mut a = Vec::new();
    write_records(&one, &mut a).unwrap();
    let mut b = Vec::new();
    write_records(&many, &mut b).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a.clone()).unwrap().starts_with(CSV_HEADER));
    assert_eq!(read_records(&a[..]).unwrap(), one);
    assert!(one.iter().all(|r| r.wall_time_ms == 0));
}

#[test]
fn master_seed_changes_instances() {
    let specs = vec![AlgorithmSpec::Backward {
        epsilon: Scalar::Fixed(0.2),
        n: Scalar::Fixed(5.0),
    }];
    let a = run_experiment(&config(specs.clone(), vec![20], 2), None).unwrap();
    let mut c = config(specs, vec![20], 2);
    c.master_seed = 100;
    let b = run_experiment(&c, None).unwrap();
    assert_ne!(a[0].seed, b[0].seed);
}

#[test]
fn summary_of_a_sweep() {
    let c = config(
        vec![
            AlgorithmSpec::Forward {
                horizon: Scalar::Fixed(10.0),
                trajectories: Scalar::Fixed(4.0),
            },
            AlgorithmSpec::Backward {
                epsilon: Scalar::Fixed(0.15),
                n: Scalar::Fixed(20.0),
            },
        ],
        vec![50, 100],
        3,
    );
    let rows = summarize(&run_experiment(&c, None).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let forward = rows.iter().find(|r| r.algorithm == "forward").unwrap();
    assert!((forward.loglog_slope.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(forward.samples_std, 0.0);
    assert!(rows.iter().all(|r| r.backward_forward_ratio.is_some()));
}
