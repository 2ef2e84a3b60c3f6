//! Independent agents, one-shot averaging and an optional gossip finisher.

use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;

use crate::chain::MarkovRewardProcess;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::Matrix;
use crate::rng::{stream_rng, StreamId};
use crate::td::{run_single_agent, RunOutput, RunSpec, Snapshot};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Doubly stochastic, non-negative mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    w: Matrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GossipFile {
    weights: Vec<Vec<f64>>,
}

impl GossipMatrix {
    pub fn new(w: Matrix) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() != n {
            return Err(Error::invalid(
                "gossip matrix",
                format!("must be square, got {}x{}", n, w.ncols()),
            ));
        }
        for i in 0..n {
            let row = w.row(i);
            let col = w.column(i);
            let min = row.min().min(col.min());
            for (what, sum) in [("row", row.sum()), ("column", col.sum())] {
                if (sum - 1.0).abs() > STOCHASTIC_TOL || min < 0.0 {
                    return Err(Error::NotStochastic {
                        what: "gossip matrix".into(),
                        row: format!("{what} {i}"),
                        sum,
                        min,
                    });
                }
            }
        }
        Ok(GossipMatrix { w })
    }

    /// Every agent talks to every other: `W = 11ᵀ/N`.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("agents", "need at least one agent"));
        }
        Self::new(Matrix::from_element(n, n, 1.0 / n as f64))
    }

    /// Metropolis weights `1/(1 + max(deg_i, deg_j))` on a graph.
    fn metropolis(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("agents", "need at least one agent"));
        }
        let mut degree = vec![0usize; n];
        for &(i, j) in edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut w = Matrix::zeros(n, n);
        for &(i, j) in edges {
            let weight = 1.0 / (1 + degree[i].max(degree[j])) as f64;
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        for i in 0..n {
            let off: f64 = w.row(i).sum();
            w[(i, i)] = 1.0 - off;
        }
        Self::new(w)
    }

    pub fn ring(n: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = match n {
            0 | 1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self::metropolis(n, &edges)
    }

    /// Agent 0 is the hub.
    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
        Self::metropolis(n, &edges)
    }

    /// Reads `weights = [[...], ...]` from a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GossipFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let n = file.weights.len();
        if let Some(row) = file.weights.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                axis: "gossip weights",
                expected: n,
                found: row.len(),
            });
        }
        Self::new(Matrix::from_fn(n, n, |i, j| file.weights[i][j]))
    }

    /// `complete`, `ring`, `star`, or `file=PATH`.
    pub fn from_topology(name: &str, n: usize) -> Result<Self> {
        let w = match name {
            "complete" => Self::complete(n)?,
            "ring" => Self::ring(n)?,
            "star" => Self::star(n)?,
            _ => match name.strip_prefix("file=") {
                Some(path) => Self::load(Path::new(path))?,
                None => return Err(Error::Config(format!("unknown topology {name:?}"))),
            },
        };
        if w.size() != n {
            return Err(Error::Dimension {
                axis: "gossip matrix",
                expected: n,
                found: w.size(),
            });
        }
        Ok(w)
    }

    pub fn size(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    /// Second-largest singular value: the per-round contraction of the
    /// deviation from the mean.
    pub fn contraction(&self) -> f64 {
        let mut sv: Vec<f64> = self.w.clone().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv.get(1).copied().unwrap_or(0.0)
    }

    fn apply(&self, params: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut out = vec![0.0; params[i].len()];
                for (j, p) in params.iter().enumerate() {
                    let w = self.w[(i, j)];
                    if w != 0.0 {
                        out.iter_mut().zip(p).for_each(|(o, v)| *o += w * v);
                    }
                }
                out
            })
            .collect()
    }
}

fn check_params(params: &[Vec<f64>]) -> Result<usize> {
    let first = params.first().ok_or_else(|| Error::invalid("params", "empty list"))?;
    let d = first.len();
    if let Some(bad) = params.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            axis: "parameter vector",
            expected: d,
            found: bad.len(),
        });
    }
    Ok(d)
}

/// `(1/N) Σ θ(i)`.
pub fn one_shot_average(params: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = check_params(params)?;
    let mut sum = vec![0.0; d];
    for p in params {
        sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    let n = params.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Per-round record of a gossip run.
#[derive(Debug, Clone)]
pub struct ConsensusRun {
    pub params: Vec<Vec<f64>>,
    /// `max_i ‖x_i − x̄‖_∞` before the first round and after each round.
    pub max_deviation: Vec<f64>,
    /// `‖mean_r − mean_0‖_∞` after each round.
    pub mean_drift: Vec<f64>,
}

/// Applies `x ← Wx` coordinate-wise `rounds` times.
pub fn consensus_average(params: &[Vec<f64>], w: &GossipMatrix, rounds: usize) -> Result<Vec<Vec<f64>>> {
    Ok(consensus_run(params, w, rounds)?.params)
}

pub fn consensus_run(params: &[Vec<f64>], w: &GossipMatrix, rounds: usize) -> Result<ConsensusRun> {
    check_params(params)?;
    if w.size() != params.len() {
        return Err(Error::Dimension {
            axis: "gossip matrix",
            expected: params.len(),
            found: w.size(),
        });
    }
    let target = one_shot_average(params)?;
    let deviation = |xs: &[Vec<f64>]| {
        xs.iter()
            .flat_map(|x| x.iter().zip(&target).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    let mut current = params.to_vec();
    let mut max_deviation = vec![deviation(&current)];
    let mut mean_drift = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        current = w.apply(&current);
        max_deviation.push(deviation(&current));
        let mean = one_shot_average(&current)?;
        mean_drift.push(mean.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok(ConsensusRun {
        params: current,
        max_deviation,
        mean_drift,
    })
}

#[derive(Debug, Clone)]
pub enum Averaging {
    OneShot,
    Consensus { matrix: GossipMatrix, rounds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon over agents; `Some(k)` caps the pool at `k` threads.
    #[default]
    Parallel,
    ParallelCapped(usize),
}

#[derive(Debug, Clone)]
pub struct FleetConfig {
    pub agents: usize,
    pub spec: RunSpec,
    pub base_seed: u64,
    /// Seed block and replication index, packed into each agent's stream.
    pub block: u64,
    pub replication: u64,
    pub averaging: Averaging,
    pub execution: Execution,
    /// Gives every agent stream 0. Only useful for testing independence.
    #[doc(hidden)]
    pub shared_stream: bool,
}

impl FleetConfig {
    pub fn new(agents: usize, spec: RunSpec, base_seed: u64) -> Self {
        FleetConfig {
            agents,
            spec,
            base_seed,
            block: 0,
            replication: 0,
            averaging: Averaging::OneShot,
            execution: Execution::default(),
            shared_stream: false,
        }
    }

    pub fn validate(&self, chain: &MarkovRewardProcess, features: &FeatureMap) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::invalid("agents", "need at least one agent"));
        }
        if let Averaging::Consensus { matrix, .. } = &self.averaging {
            if matrix.size() != self.agents {
                return Err(Error::Dimension {
                    axis: "gossip matrix",
                    expected: self.agents,
                    found: matrix.size(),
                });
            }
        }
        if let Execution::ParallelCapped(0) = self.execution {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        // also checks that every stream id fits
        self.stream(self.agents - 1)?;
        self.spec.validate(chain, features)
    }

    fn stream(&self, agent: usize) -> Result<StreamId> {
        let agent = if self.shared_stream { 0 } else { agent as u64 };
        StreamId::new(self.block, self.replication, agent)
    }
}

#[derive(Debug, Clone)]
pub struct FleetResult {
    /// `θ_T(i)` per agent.
    pub finals: Vec<Vec<f64>>,
    /// `θ̄_T`, the one-shot mean.
    pub average: Vec<f64>,
    /// Per-agent parameters after the gossip finisher, when configured.
    pub consensus: Option<ConsensusRun>,
    pub snapshots: Vec<Vec<Snapshot>>,
    pub steps: Vec<u64>,
    pub episodes: Vec<u64>,
    /// Wall-clock time of the run; zero on targets without a clock.
    pub elapsed: Duration,
}

fn run_agent(config: &FleetConfig, chain: &MarkovRewardProcess, features: &FeatureMap, i: usize) -> Result<RunOutput> {
    let rng = stream_rng(config.base_seed, config.stream(i)?);
    run_single_agent(chain, features, &config.spec, rng).map_err(|e| match e {
        Error::Diverged { step, .. } => Error::Diverged { agent: Some(i), step },
        other => other,
    })
}

struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

/// Runs `N` agents with disjoint streams and averages their final
/// parameters. The result does not depend on the execution mode.
pub fn run_fleet(config: &FleetConfig, chain: &MarkovRewardProcess, features: &FeatureMap) -> Result<FleetResult> {
    config.validate(chain, features)?;
    let started = Stopwatch::start();
    let job = |i: usize| run_agent(config, chain, features, i);
    let outputs: Vec<Result<RunOutput>> = match config.execution {
        Execution::Sequential => (0..config.agents).map(job).collect(),
        Execution::Parallel => (0..config.agents).into_par_iter().map(job).collect(),
        Execution::ParallelCapped(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(|| (0..config.agents).into_par_iter().map(job).collect()),
    };
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let finals: Vec<Vec<f64>> = outputs.iter().map(|o| o.agent.theta().to_vec()).collect();
    let average = one_shot_average(&finals)?;
    let consensus = match &config.averaging {
        Averaging::OneShot => None,
        Averaging::Consensus { matrix, rounds } => Some(consensus_run(&finals, matrix, *rounds)?),
    };
    Ok(FleetResult {
        average,
        consensus,
        steps: outputs.iter().map(|o| o.agent.steps()).collect(),
        episodes: outputs.iter().map(|o| o.agent.episodes()).collect(),
        snapshots: outputs.into_iter().map(|o| o.snapshots).collect(),
        finals,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        assert_eq!(one_shot_average(&[vec![1.0, -2.0]]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(
            one_shot_average(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap(),
            vec![0.0, 0.0]
        );
        let e = |k: usize| (0..3).map(|j| if j == k { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        assert_eq!(
            one_shot_average(&[e(0), e(1), e(2), vec![0.0; 3]]).unwrap(),
            vec![0.25, 0.25, 0.25]
        );
        assert!(one_shot_average(&[]).is_err());
    }

    #[test]
    fn complete_graph_averages_in_one_round() {
        let params = vec![vec![1.0], vec![2.0], vec![6.0]];
        let out = consensus_average(&params, &GossipMatrix::complete(3).unwrap(), 1).unwrap();
        for p in out {
            assert!((p[0] - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_leaves_params() {
        let params = vec![vec![1.0, 4.0], vec![2.0, -1.0]];
        let id = GossipMatrix::new(Matrix::identity(2, 2)).unwrap();
        assert_eq!(consensus_average(&params, &id, 7).unwrap(), params);
    }

    #[test]
    fn ring_weights_are_thirds() {
        let w = GossipMatrix::ring(8).unwrap();
        assert_eq!(w.matrix()[(0, 0)], 1.0 - 2.0 / 3.0);
        assert_eq!(w.matrix()[(0, 1)], 1.0 / 3.0);
        assert_eq!(w.matrix()[(0, 7)], 1.0 / 3.0);
        assert_eq!(w.matrix()[(0, 4)], 0.0);
    }

    #[test]
    fn star_is_doubly_stochastic() {
        let w = GossipMatrix::star(5).unwrap();
        assert!(w.contraction() < 1.0);
    }

    #[test]
    fn rejects_non_stochastic() {
        let w = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.6, 0.4]);
        assert!(matches!(GossipMatrix::new(w), Err(Error::NotStochastic { .. })));
        let neg = Matrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!(GossipMatrix::new(neg).is_err());
    }
}
