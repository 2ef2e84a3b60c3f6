mod common;

use oneshot_td::chain::{stationary_distribution, MarkovRewardProcess};
use oneshot_td::experiments::rms_error;
use oneshot_td::instances::{random_instance, random_walk_instance, two_state};
use oneshot_td::td::*;
use oneshot_td::truth::GroundTruth;
use oneshot_td::{Error, FeatureMap, Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn instance(seed: u64, states: usize, dim: usize, gamma: f64) -> (MarkovRewardProcess, FeatureMap) {
    random_instance(&mut rng(seed), states, dim, gamma).unwrap()
}

#[test]
fn bellman_identity_for_td_error() {
    let (chain, _) = instance(1, 4, 1, 0.9);
    let f = FeatureMap::tabular(4);
    let v = oneshot_td::chain::value_function_exact(&chain).unwrap();
    for s in 0..4 {
        let mean: f64 = chain
            .outcomes(s)
            .iter()
            .map(|o| o.prob * td_error(v.as_slice(), f.row(s), Some(f.row(o.next)), o.reward, 0.9))
            .sum();
        assert!(mean.abs() < 1e-10);
    }
}

#[test]
fn td0_three_step_hand_trace() {
    // φ(0) = (1, 0), φ(1) = (0.5, 0.5), γ = 0.5, α = 0.1
    let f = FeatureMap::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5])).unwrap();
    let mut agent = AgentState::new(vec![0.0, 0.0], 0, rng(0));
    let steps = [(0, 1, 1.0), (1, 1, 0.0), (1, 0, 2.0)];
    for &(from, to, reward) in &steps {
        let tr = Transition {
            from,
            to,
            reward,
            terminal: false,
        };
        td0_step(&mut agent, &f, 0.5, &tr, 0.1).unwrap();
    }
    // step 1: δ = 1 → θ = (0.1, 0)
    // step 2: v(1) = 0.05, δ = 0.5·0.05 − 0.05 = −0.025 → θ = (0.09875, −0.00125)
    // step 3: v(1) = 0.04875, v(0) = 0.09875, δ = 2 + 0.049375 − 0.04875 = 2.000625
    //         θ += 0.1·2.000625·(0.5, 0.5)
    let expected = [0.09875 + 0.10003125, -0.00125 + 0.10003125];
    for (a, b) in agent.theta().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn tdlambda_trace_after_three_states() {
    let f = FeatureMap::new(Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.6, 0.8])).unwrap();
    let mut agent = AgentState::new(vec![0.0, 0.0], 0, rng(0));
    for (from, to) in [(0, 1), (1, 2), (2, 0)] {
        let tr = Transition {
            from,
            to,
            reward: 0.0,
            terminal: false,
        };
        tdlambda_step(&mut agent, &f, 1.0, 0.5, &tr, 0.1).unwrap();
    }
    // z = φ(2) + 0.5 φ(1) + 0.25 φ(0)
    let expected = [0.6 + 0.25, 0.8 + 0.5];
    for (a, b) in agent.trace().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn tdlambda_three_step_hand_trace() {
    let f = FeatureMap::tabular(2);
    let mut agent = AgentState::new(vec![0.0, 0.0], 0, rng(0));
    let (gamma, gl, alpha) = (0.9, 0.45, 0.5);
    let steps = [(0, 1, 1.0), (1, 0, 0.0), (0, 0, -1.0)];
    for &(from, to, reward) in &steps {
        let tr = Transition {
            from,
            to,
            reward,
            terminal: false,
        };
        tdlambda_step(&mut agent, &f, gamma, gl, &tr, alpha).unwrap();
    }
    // z1 = (1, 0), δ1 = 1 → θ = (0.5, 0)
    // z2 = (0.45, 1), δ2 = 0 + 0.9·0.5 − 0 = 0.45 → θ = (0.60125, 0.225)
    // z3 = (1.2025, 0.45), δ3 = −1 + 0.9·0.60125 − 0.60125 = −1.060125
    let d3 = -1.0 + 0.9 * 0.60125 - 0.60125;
    let expected = [0.60125 + alpha * d3 * 1.2025, 0.225 + alpha * d3 * 0.45];
    for (a, b) in agent.theta().iter().zip(expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn trace_clears_after_terminal_step() {
    let rw = random_walk_instance();
    let spec = RunSpec::new(
        Variant::TdLambda(0.9),
        StepSchedule::constant(0.1),
        Horizon::Episodes(1),
    );
    let out = run_single_agent(&rw.chain, &rw.features, &spec, rng(5)).unwrap();
    assert_eq!(out.agent.episodes(), 1);
    assert!(out.agent.trace().iter().all(|&z| z == 0.0));
    assert_eq!(out.agent.state(), 2);
}

#[test]
fn uniform_row_frequencies() {
    let chain = two_state(0.5, 0.5, 0.9).unwrap();
    let mut r = rng(77);
    let n = 100_000;
    let ones = (0..n).filter(|_| sample_transition(&chain, 0, &mut r).to == 1).count() as f64;
    let sd = (n as f64 * 0.25).sqrt();
    assert!((ones - n as f64 * 0.5).abs() < 3.0 * sd);
}

#[test]
fn sampling_replays_with_the_same_seed() {
    let (chain, _) = instance(3, 6, 2, 0.9);
    let draw = |seed| {
        let mut r = rng(seed);
        let mut s = 0;
        (0..100)
            .map(|_| {
                s = sample_transition(&chain, s, &mut r).to;
                s
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
}

#[test]
fn expected_update_matches_stationary_sampling() {
    let (chain, f) = instance(17, 4, 2, 0.8);
    let gt = GroundTruth::build(&chain, &f, 0.0).unwrap();
    let theta = Vector::from_vec(vec![0.7, -0.4]);
    let target = gt.expected_update_td0(&theta);
    let mu = stationary_distribution(&chain).unwrap();
    let start = StartDistribution::Weights(mu.mu().as_slice().to_vec());
    let mut r = rng(123);
    let n = 1_000_000;
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for _ in 0..n {
        let s = start.draw(&chain, &mut r).unwrap();
        let tr = sample_transition(&chain, s, &mut r);
        let delta = td_error(theta.as_slice(), f.row(s), Some(f.row(tr.to)), tr.reward, 0.8);
        for k in 0..2 {
            let g = delta * f.row(s)[k];
            sum[k] += g;
            sum_sq[k] += g * g;
        }
    }
    for k in 0..2 {
        let mean = sum[k] / n as f64;
        let se = ((sum_sq[k] / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - target[k]).abs() < 5.0 * se,
            "component {k}: {mean} vs {}",
            target[k]
        );
    }
}

#[test]
fn lambda_zero_trajectory_equals_td0() {
    let rw = random_walk_instance();
    for seed in 0..5 {
        let cadence = Cadence::Steps(1);
        let td0 = RunSpec::new(Variant::Td0, StepSchedule::constant(0.05), Horizon::Steps(2_000)).with_cadence(cadence);
        let tdl = RunSpec::new(
            Variant::TdLambda(0.0),
            StepSchedule::constant(0.05),
            Horizon::Steps(2_000),
        )
        .with_cadence(cadence);
        let a = run_single_agent(&rw.chain, &rw.features, &td0, rng(seed)).unwrap();
        let b = run_single_agent(&rw.chain, &rw.features, &tdl, rng(seed)).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
    }
}

#[test]
fn same_seed_same_parameters() {
    let (chain, f) = instance(4, 5, 3, 0.9);
    let spec = RunSpec::new(
        Variant::TdLambda(0.5),
        StepSchedule::constant(0.01),
        Horizon::Steps(5_000),
    );
    let a = run_single_agent(&chain, &f, &spec, rng(8)).unwrap();
    let b = run_single_agent(&chain, &f, &spec, rng(8)).unwrap();
    assert_eq!(a.agent.theta(), b.agent.theta());
}

#[test]
fn random_walk_hundred_episodes_reduces_rms() {
    let rw = random_walk_instance();
    let spec = RunSpec::new(Variant::Td0, StepSchedule::constant(1e-3), Horizon::Episodes(100))
        .with_cadence(Cadence::Episodes(1));
    let truth = rw.truth.as_slice();
    let out = run_single_agent(&rw.chain, &rw.features, &spec, rng(2024)).unwrap();
    let first = rms_error(&out.snapshots[0].theta, truth).unwrap();
    let last = rms_error(&out.snapshots.last().unwrap().theta, truth).unwrap();
    assert!((first - (55.0_f64 / 180.0).sqrt()).abs() < 1e-15);
    assert!(last < first);
    // frozen from seed 2024
    assert!((last - RANDOM_WALK_RMS_AFTER_100).abs() < 1e-12, "{last}");
}

const RANDOM_WALK_RMS_AFTER_100: f64 = 0.5386469896194056;

#[test]
fn divergence_is_reported_with_the_step() {
    let (chain, f) = instance(6, 4, 2, 0.95);
    let spec = RunSpec::new(
        Variant::TdLambda(0.9),
        StepSchedule::constant(1e150),
        Horizon::Steps(100_000),
    );
    match run_single_agent(&chain, &f, &spec, rng(1)) {
        Err(Error::Diverged { step, .. }) => assert!(step < 100_000),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn schedule_formulas_hold_across_a_million_steps() {
    let td0 = StepSchedule::td0_decay(0.3, 0.9);
    let tdl = StepSchedule::tdlambda_decay(0.3, 0.25);
    let mut prev = f64::INFINITY;
    for t in (0..=1_000_000u64).step_by(997) {
        let a = td0.alpha(t);
        assert_eq!(a, 2.0 / (0.3 * (t as f64 + 1.0) * (1.0 - 0.9)));
        assert_eq!(tdl.alpha(t), 2.0 / (0.3 * (t as f64 + 1.0) * 0.75));
        assert!(a > 0.0 && a <= prev);
        prev = a;
    }
}

#[test]
fn run_rejects_bad_inputs() {
    let (chain, f) = instance(6, 4, 2, 0.95);
    let bad_theta = RunSpec::new(Variant::Td0, StepSchedule::constant(0.1), Horizon::Steps(1)).with_theta0(vec![0.0]);
    assert!(run_single_agent(&chain, &f, &bad_theta, rng(0)).is_err());
    let episodes = RunSpec::new(Variant::Td0, StepSchedule::constant(0.1), Horizon::Episodes(1));
    assert!(run_single_agent(&chain, &f, &episodes, rng(0)).is_err());
    let bad_start = RunSpec::new(Variant::Td0, StepSchedule::constant(0.1), Horizon::Steps(1))
        .with_start(StartDistribution::State(10));
    assert!(run_single_agent(&chain, &f, &bad_start, rng(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_recursion_equals_summation(seed in any::<u64>(), len in 1usize..200, gl in 0.0f64..0.99) {
        let (chain, f) = instance(seed % 50, 5, 3, 0.99);
        let mut r = rng(seed);
        let mut agent = AgentState::new(vec![0.0; 3], 0, rng(0));
        let mut path = vec![0usize];
        for _ in 0..len {
            let tr = sample_transition(&chain, agent.state(), &mut r);
            let alpha: f64 = r.random_range(0.0..0.01);
            tdlambda_step(&mut agent, &f, 0.99, gl, &tr, alpha.max(1e-6)).unwrap();
            let summed = common::trace_by_summation(&f, &path, gl);
            for (a, b) in agent.trace().iter().zip(&summed) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(oneshot_td::linalg::norm2(agent.trace()) <= 1.0 / (1.0 - gl) + 1e-12);
            path.push(tr.to);
        }
    }

    #[test]
    fn lambda_zero_is_bit_identical(seed in any::<u64>()) {
        let (chain, f) = instance(seed % 20, 6, 3, 0.9);
        let td0 = RunSpec::new(Variant::Td0, StepSchedule::constant(0.02), Horizon::Steps(500)).with_cadence(Cadence::Steps(1));
        let tdl = RunSpec::new(Variant::TdLambda(0.0), StepSchedule::constant(0.02), Horizon::Steps(500)).with_cadence(Cadence::Steps(1));
        let a = run_single_agent(&chain, &f, &td0, rng(seed)).unwrap();
        let b = run_single_agent(&chain, &f, &tdl, rng(seed)).unwrap();
        prop_assert_eq!(a.snapshots, b.snapshots);
    }
}
