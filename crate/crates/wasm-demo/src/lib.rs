//! Browser bindings for three small explorations: fleet learning curves on
//! the random walk, mixing against Markov noise on a two-state chain, and
//! gossip contraction by topology.

use oneshot_td::chain::mixing_profile;
use oneshot_td::experiments::{markov_noise_probe, Evaluator};
use oneshot_td::fleet::{consensus_run, run_fleet, Execution};
use oneshot_td::instances::{random_walk_instance, two_state};
use oneshot_td::td::{Cadence, Horizon, RunSpec, StepSchedule, Variant};
use oneshot_td::{FeatureMap, FleetConfig, GossipMatrix, GroundTruth, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js(e: oneshot_td::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// RMS error of the averaged estimate on the random walk after each
/// episode, averaged over `replications` fleets of `agents` learners.
/// `lambda < 0` selects TD(0).
#[wasm_bindgen]
pub fn fleet_rms_curve(
    agents: usize,
    episodes: u64,
    alpha: f64,
    lambda: f64,
    replications: u64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let rw = random_walk_instance();
    let variant = if lambda < 0.0 {
        Variant::Td0
    } else {
        Variant::TdLambda(lambda)
    };
    let gt = GroundTruth::build(&rw.chain, &rw.features, variant.lambda()).map_err(js)?;
    let eval = Evaluator::from_truth(&gt, lambda >= 0.0).map_err(js)?;
    let spec = RunSpec::new(variant, StepSchedule::constant(alpha), Horizon::Episodes(episodes))
        .with_cadence(Cadence::Episodes(1));
    let mut curve = vec![0.0; episodes as usize + 1];
    for r in 0..replications.max(1) {
        let mut cfg = FleetConfig::new(agents, spec.clone(), seed);
        cfg.replication = r;
        cfg.execution = Execution::Sequential;
        let res = run_fleet(&cfg, &rw.chain, &rw.features).map_err(js)?;
        let dim = res.average.len();
        for (k, slot) in curve.iter_mut().enumerate() {
            let mut mean = vec![0.0; dim];
            for snaps in &res.snapshots {
                for (m, x) in mean.iter_mut().zip(&snaps[k].theta) {
                    *m += x / agents as f64;
                }
            }
            *slot += eval.rms(&mean).unwrap_or(f64::NAN) / replications.max(1) as f64;
        }
    }
    Ok(curve)
}

/// For the chain with `P(0→1) = p`, `P(1→0) = q`: the distance to
/// stationarity `d(t)` followed by the Markov noise at `θ = 0`, each of
/// length `t_max + 1`.
#[wasm_bindgen]
pub fn two_state_mixing(p: f64, q: f64, gamma: f64, t_max: usize) -> Result<Vec<f64>, JsError> {
    let chain = two_state(p, q, gamma).map_err(js)?;
    let features = FeatureMap::tabular(2);
    let gt = GroundTruth::build(&chain, &features, 0.0).map_err(js)?;
    let profile = mixing_profile(&chain, t_max.max(2)).map_err(js)?;
    let noise = markov_noise_probe(&gt, &Vector::zeros(2), 0, t_max).map_err(js)?;
    let mut out: Vec<f64> = profile.distances()[..=t_max].to_vec();
    out.extend(noise.iter().map(|r| r.noise));
    Ok(out)
}

/// Largest deviation from the mean after each gossip round, starting from
/// random parameters. `topology` is `complete`, `ring` or `star`.
#[wasm_bindgen]
pub fn consensus_deviation(topology: &str, agents: usize, rounds: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let w = GossipMatrix::from_topology(topology, agents).map_err(js)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<Vec<f64>> = (0..agents)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Ok(consensus_run(&params, &w, rounds).map_err(js)?.max_deviation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_expected_lengths() {
        assert_eq!(fleet_rms_curve(2, 5, 0.01, -1.0, 2, 1).ok().unwrap().len(), 6);
        assert_eq!(two_state_mixing(0.3, 0.6, 0.9, 20).ok().unwrap().len(), 42);
        let dev = consensus_deviation("ring", 6, 30, 3).ok().unwrap();
        assert_eq!(dev.len(), 31);
        assert!(dev[30] < dev[0]);
    }
}
