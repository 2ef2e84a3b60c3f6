//! Built-in problems and a generator of random ergodic instances.

use rand::Rng;

use crate::chain::{build_induced_chain, MarkovRewardProcess, Mdp, Policy};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{Matrix, Vector};

/// Index of the center state C in the chain (A = 0, …, E = 4).
pub const RANDOM_WALK_START: usize = 2;
pub const RANDOM_WALK_CONTINUING_GAMMA: f64 = 0.99;

/// The five-state random walk: states A–E between two terminals, a fair
/// coin for left/right, reward 1 on reaching the right end.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    pub mdp: Mdp,
    pub policy: Policy,
    pub chain: MarkovRewardProcess,
    pub features: FeatureMap,
    /// `V(A..E) = [1, 2, 3, 4, 5] / 6`.
    pub truth: Vector,
}

pub fn random_walk_mdp() -> Mdp {
    let n = 7;
    let mut left = Matrix::zeros(n, n);
    let mut right = Matrix::zeros(n, n);
    for s in 1..6 {
        left[(s, s - 1)] = 1.0;
        right[(s, s + 1)] = 1.0;
    }
    for t in [0, 6] {
        left[(t, t)] = 1.0;
        right[(t, t)] = 1.0;
    }
    let mut reward = Matrix::zeros(n, n);
    reward[(5, 6)] = 1.0;
    Mdp::new(vec![left, right], reward, 1.0)
        .and_then(|m| m.with_episodes(3, vec![0, 6]))
        .expect("random walk is well formed")
}

pub fn random_walk_instance() -> RandomWalk {
    let mdp = random_walk_mdp();
    let policy = Policy::uniform(7, 2);
    let chain = build_induced_chain(&mdp, &policy).expect("random walk chain builds");
    RandomWalk {
        features: FeatureMap::tabular(chain.num_states()),
        truth: Vector::from_fn(5, |i, _| (i + 1) as f64 / 6.0),
        mdp,
        policy,
        chain,
    }
}

/// The random walk as a continuing chain (terminations jump back to C and
/// keep bootstrapping) with `γ = 0.99`.
pub fn random_walk_continuing() -> MarkovRewardProcess {
    random_walk_instance()
        .chain
        .continuing()
        .with_gamma(RANDOM_WALK_CONTINUING_GAMMA)
        .expect("0.99 is a valid discount")
}

/// Two-state chain with `P(0→1) = p`, `P(1→0) = q` and reward 1 in state 0.
pub fn two_state(p: f64, q: f64, gamma: f64) -> Result<MarkovRewardProcess> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(
                if name == "p" { "p" } else { "q" },
                format!("{v} is not a probability"),
            ));
        }
    }
    let kernel = Matrix::from_row_slice(2, 2, &[1.0 - p, p, q, 1.0 - q]);
    MarkovRewardProcess::with_state_rewards(kernel, &Vector::from_vec(vec![1.0, 0.0]), gamma)
}

/// A fixed four-state continuing chain with `γ = 0.5`.
pub fn four_state() -> MarkovRewardProcess {
    let kernel = Matrix::from_row_slice(
        4,
        4,
        &[
            0.1, 0.6, 0.2, 0.1, //
            0.3, 0.1, 0.5, 0.1, //
            0.2, 0.2, 0.1, 0.5, //
            0.5, 0.1, 0.2, 0.2,
        ],
    );
    let reward = Matrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, -0.5, //
            0.5, 0.0, 1.0, 0.0, //
            -1.0, 0.0, 0.0, 1.0, //
            0.0, 0.5, -0.5, 0.0,
        ],
    );
    MarkovRewardProcess::new(kernel, reward, 0.5).expect("four-state chain is well formed")
}

/// Names accepted by [`builtin`].
pub const BUILTINS: [&str; 3] = ["randomwalk", "randomwalk-continuing", "four-state"];

/// A built-in chain with tabular features.
pub fn builtin(name: &str) -> Result<(MarkovRewardProcess, FeatureMap)> {
    let chain = match name {
        "randomwalk" => random_walk_instance().chain,
        "randomwalk-continuing" => random_walk_continuing(),
        "four-state" => four_state(),
        _ => {
            return Err(Error::Config(format!(
                "unknown problem {name:?}; built-ins are {}",
                BUILTINS.join(", ")
            )))
        }
    };
    let features = FeatureMap::tabular(chain.num_states());
    Ok((chain, features))
}

/// A random continuing instance: every state has at least one successor
/// besides the cycle edge `s → s+1`, so the chain is irreducible; a
/// self-loop on state 0 makes it aperiodic.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    states: usize,
    dim: usize,
    gamma: f64,
) -> Result<(MarkovRewardProcess, FeatureMap)> {
    if states == 0 || dim == 0 || dim > states {
        return Err(Error::invalid(
            "instance size",
            format!("need 1 ≤ d ≤ |S|, got d = {dim}, |S| = {states}"),
        ));
    }
    let n = states;
    let mut kernel = Matrix::zeros(n, n);
    for s in 0..n {
        kernel[(s, (s + 1) % n)] = rng.random_range(0.05..1.0);
        for t in 0..n {
            if rng.random_bool(0.5) {
                kernel[(s, t)] += rng.random_range(0.0..1.0);
            }
        }
    }
    kernel[(0, 0)] += 0.1;
    for s in 0..n {
        let sum: f64 = kernel.row(s).sum();
        kernel.row_mut(s).iter_mut().for_each(|p| *p /= sum);
    }
    let reward = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let chain = MarkovRewardProcess::new(kernel, reward, gamma)?;
    loop {
        let mut phi = Matrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        for s in 0..n {
            let norm = phi.row(s).norm();
            let target = rng.random_range(0.2..1.0);
            if norm > 0.0 {
                phi.row_mut(s).iter_mut().for_each(|v| *v *= target / norm);
            }
        }
        if let Ok(features) = FeatureMap::new(phi) {
            return Ok((chain, features));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{stationary_distribution, value_function_exact, Regime};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_walk_values() {
        let rw = random_walk_instance();
        let v = value_function_exact(&rw.chain).unwrap();
        assert!((v - &rw.truth).amax() < 1e-10);
        assert_eq!(rw.chain.start_state(), Some(RANDOM_WALK_START));
        assert_eq!(rw.chain.regime(), Regime::Episodic);
    }

    #[test]
    fn random_walk_stationary_is_positive() {
        let mu = stationary_distribution(&random_walk_instance().chain).unwrap();
        let expected = [1.0, 2.0, 3.0, 2.0, 1.0].map(|x| x / 9.0);
        for (m, e) in mu.mu().iter().zip(expected) {
            assert!((m - e).abs() < 1e-12);
        }
    }

    #[test]
    fn random_instances_are_ergodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (chain, f) = random_instance(&mut rng, 6, 3, 0.9).unwrap();
            assert!(stationary_distribution(&chain).unwrap().mu().min() > 0.0);
            assert_eq!(f.dim(), 3);
        }
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = builtin("cliff").unwrap_err();
        assert!(err.to_string().contains("randomwalk"));
    }
}
