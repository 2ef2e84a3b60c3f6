use oneshot_td::experiments::mean_stderr;
use oneshot_td::fleet::*;
use oneshot_td::instances::{random_instance, random_walk_instance};
use oneshot_td::td::{Horizon, RunSpec, StepSchedule, Variant};
use oneshot_td::{Error, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn walk_spec(steps: u64) -> RunSpec {
    RunSpec::new(Variant::Td0, StepSchedule::constant(0.05), Horizon::Steps(steps))
}

#[test]
fn single_agent_average_is_its_parameters() {
    let rw = random_walk_instance();
    let res = run_fleet(&FleetConfig::new(1, walk_spec(500), 3), &rw.chain, &rw.features).unwrap();
    assert_eq!(res.average, res.finals[0]);
}

#[test]
fn shared_stream_gives_identical_agents() {
    let rw = random_walk_instance();
    let mut cfg = FleetConfig::new(5, walk_spec(500), 3);
    cfg.shared_stream = true;
    let res = run_fleet(&cfg, &rw.chain, &rw.features).unwrap();
    for f in &res.finals {
        assert_eq!(f, &res.finals[0]);
    }
    for (a, b) in res.average.iter().zip(&res.finals[0]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn distinct_streams_give_distinct_agents() {
    let rw = random_walk_instance();
    let res = run_fleet(&FleetConfig::new(3, walk_spec(500), 3), &rw.chain, &rw.features).unwrap();
    assert_ne!(res.finals[0], res.finals[1]);
}

#[test]
fn execution_mode_does_not_change_results() {
    let rw = random_walk_instance();
    let spec = RunSpec::new(
        Variant::TdLambda(0.9),
        StepSchedule::constant(0.01),
        Horizon::Steps(3_000),
    )
    .with_cadence(oneshot_td::td::Cadence::Steps(100));
    let run = |execution| {
        let mut cfg = FleetConfig::new(4, spec.clone(), 99);
        cfg.execution = execution;
        run_fleet(&cfg, &rw.chain, &rw.features).unwrap()
    };
    let seq = run(Execution::Sequential);
    for mode in [
        Execution::Parallel,
        Execution::ParallelCapped(1),
        Execution::ParallelCapped(3),
    ] {
        let other = run(mode);
        assert_eq!(seq.finals, other.finals);
        assert_eq!(seq.average, other.average);
        assert_eq!(seq.snapshots, other.snapshots);
    }
}

#[test]
fn one_shot_average_is_exact_mean() {
    let rw = random_walk_instance();
    let res = run_fleet(&FleetConfig::new(6, walk_spec(800), 1), &rw.chain, &rw.features).unwrap();
    for k in 0..res.average.len() {
        let mean = res.finals.iter().map(|f| f[k]).sum::<f64>() / 6.0;
        assert!((mean - res.average[k]).abs() < 1e-12);
    }
}

#[test]
fn divergence_names_the_agent() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (chain, f) = random_instance(&mut rng, 4, 2, 0.95).unwrap();
    let spec = RunSpec::new(Variant::Td0, StepSchedule::constant(1e150), Horizon::Steps(10_000));
    let err = run_fleet(&FleetConfig::new(3, spec, 0), &chain, &f).unwrap_err();
    assert!(matches!(err, Error::Diverged { agent: Some(0), .. }), "{err}");
}

#[test]
fn rejects_empty_fleet_and_mismatched_gossip() {
    let rw = random_walk_instance();
    assert!(run_fleet(&FleetConfig::new(0, walk_spec(10), 0), &rw.chain, &rw.features).is_err());
    let mut cfg = FleetConfig::new(4, walk_spec(10), 0);
    cfg.averaging = Averaging::Consensus {
        matrix: GossipMatrix::ring(3).unwrap(),
        rounds: 5,
    };
    assert!(run_fleet(&cfg, &rw.chain, &rw.features).is_err());
}

#[test]
fn ring_of_eight_reaches_the_mean() {
    let params: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 * 0.1, -1.0]).collect();
    let w = GossipMatrix::ring(8).unwrap();
    // second singular value of the 8-ring with weights 1/3
    let expected = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 8.0).cos()) / 3.0;
    assert!((w.contraction() - expected).abs() < 1e-12);
    let run = consensus_run(&params, &w, 100).unwrap();
    // ‖x_r − x̄‖₂ ≤ σ₂^r ‖x_0 − x̄‖₂ per coordinate, and the max norm costs √N
    let bound = expected.powi(100) * 8f64.sqrt() * run.max_deviation[0];
    assert!(*run.max_deviation.last().unwrap() <= bound);
    assert!(run.mean_drift.iter().all(|&d| d < 1e-12));
}

#[test]
fn consensus_finisher_runs_inside_the_fleet() {
    let rw = random_walk_instance();
    let mut cfg = FleetConfig::new(8, walk_spec(1_000), 5);
    cfg.averaging = Averaging::Consensus {
        matrix: GossipMatrix::ring(8).unwrap(),
        rounds: 100,
    };
    let res = run_fleet(&cfg, &rw.chain, &rw.features).unwrap();
    let gossip = res.consensus.unwrap();
    for p in &gossip.params {
        for (a, b) in p.iter().zip(&res.average) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn gossip_matrix_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.toml");
    std::fs::write(&path, "weights = [[0.5, 0.5], [0.5, 0.5]]\n").unwrap();
    let w = GossipMatrix::from_topology(&format!("file={}", path.display()), 2).unwrap();
    assert_eq!(w.matrix(), &Matrix::from_element(2, 2, 0.5));
    std::fs::write(&path, "weights = [[0.9, 0.5], [0.1, 0.5]]\n").unwrap();
    assert!(GossipMatrix::load(&path).is_err());
    assert!(GossipMatrix::from_topology("torus", 4).is_err());
}

#[test]
fn agents_are_uncorrelated_across_replications() {
    let rw = random_walk_instance();
    let reps = 200;
    let mut pairs = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut cfg = FleetConfig::new(2, walk_spec(2_000), 17);
        cfg.replication = r as u64;
        cfg.execution = Execution::Sequential;
        let res = run_fleet(&cfg, &rw.chain, &rw.features).unwrap();
        pairs.push((res.finals[0].clone(), res.finals[1].clone()));
    }
    for k in 0..5 {
        let a: Vec<f64> = pairs.iter().map(|p| p.0[k]).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1[k]).collect();
        let (ma, _) = mean_stderr(&a);
        let (mb, _) = mean_stderr(&b);
        let products: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let (cov, se) = mean_stderr(&products);
        assert!(cov.abs() < 5.0 * se, "component {k}: cov {cov}, se {se}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gossip_preserves_the_mean(values in proptest::collection::vec(-10.0f64..10.0, 6..=30),
                                 topology in 0usize..3, rounds in 0usize..40) {
        let n = values.len() / 3;
        let params: Vec<Vec<f64>> = (0..n).map(|i| values[3 * i..3 * i + 3].to_vec()).collect();
        let w = match topology {
            0 => GossipMatrix::complete(n),
            1 => GossipMatrix::ring(n),
            _ => GossipMatrix::star(n),
        }.unwrap();
        let run = consensus_run(&params, &w, rounds).unwrap();
        for d in &run.mean_drift {
            prop_assert!(*d < 1e-12);
        }
        for pair in run.max_deviation.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-15 || n == 1);
        }
    }
}
