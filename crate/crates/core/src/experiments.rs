//! Claim checks and benchmarks built on the fleet runner.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::chain::MarkovRewardProcess;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::fleet::{one_shot_average, run_fleet, Execution, FleetConfig, FleetResult};
use crate::linalg::{dist2, Vector};
use crate::rng::MAX_BLOCK;
use crate::td::{Cadence, Horizon, RunSpec, Snapshot};
use crate::truth::{td0_threshold, tdlambda_threshold, GroundTruth};

/// `sqrt(mean_s (v_est(s) − v_true(s))²)`.
pub fn rms_error(v_est: &[f64], v_true: &[f64]) -> Result<f64> {
    if v_est.len() != v_true.len() {
        return Err(Error::Dimension {
            axis: "value vector",
            expected: v_true.len(),
            found: v_est.len(),
        });
    }
    if v_true.is_empty() {
        return Err(Error::invalid("value vector", "empty"));
    }
    Ok((dist2(v_est, v_true) / v_true.len() as f64).sqrt())
}

/// One row of `curves.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub experiment: String,
    pub replication: String,
    pub agent: String,
    pub index: u64,
    pub metric: &'static str,
    pub value: f64,
}

/// Distances to `θ*` and, when the true values are known, RMS value error.
#[derive(Debug, Clone)]
pub struct Evaluator {
    features: FeatureMap,
    theta_star: Vec<f64>,
    truth: Option<Vec<f64>>,
}

impl Evaluator {
    pub fn new(features: FeatureMap, theta_star: &Vector, truth: Option<&Vector>) -> Result<Self> {
        if theta_star.len() != features.dim() {
            return Err(Error::Dimension {
                axis: "theta*",
                expected: features.dim(),
                found: theta_star.len(),
            });
        }
        Ok(Evaluator {
            features,
            theta_star: theta_star.as_slice().to_vec(),
            truth: truth.map(|v| v.as_slice().to_vec()),
        })
    }

    /// Against `θ*` for TD(0), or `θ*^(λ)` when `lambda` is set.
    pub fn from_truth(gt: &GroundTruth, lambda: bool) -> Result<Self> {
        let theta = if lambda {
            gt.theta_star_lambda()
        } else {
            gt.theta_star()
        };
        Self::new(gt.features().clone(), theta, gt.value())
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn sq_dist(&self, theta: &[f64]) -> f64 {
        dist2(theta, &self.theta_star)
    }

    pub fn dist(&self, theta: &[f64]) -> f64 {
        self.sq_dist(theta).sqrt()
    }

    pub fn rms(&self, theta: &[f64]) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        rms_error(&self.features.values(theta), truth).ok()
    }
}

/// Snapshot indices shared by every agent, with the agents' parameters at
/// each of them.
fn aligned(snapshots: &[Vec<Snapshot>]) -> Vec<(u64, Vec<Vec<f64>>)> {
    let Some(first) = snapshots.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .filter_map(|(k, snap)| {
            let thetas: Option<Vec<Vec<f64>>> = snapshots
                .iter()
                .map(|agent| agent.get(k).filter(|s| s.index == snap.index).map(|s| s.theta.clone()))
                .collect();
            thetas.map(|t| (snap.index, t))
        })
        .collect()
}

/// Per-agent `dist`/`rms` rows and averaged `dist_avg`/`rms_mean` rows
/// (agent `"avg"`) for one fleet run.
pub fn fleet_curve_rows(experiment: &str, replication: &str, result: &FleetResult, eval: &Evaluator) -> Vec<CurveRow> {
    let row = |agent: String, index, metric, value| CurveRow {
        experiment: experiment.to_string(),
        replication: replication.to_string(),
        agent,
        index,
        metric,
        value,
    };
    let mut rows = Vec::new();
    for (i, snaps) in result.snapshots.iter().enumerate() {
        for s in snaps {
            rows.push(row(i.to_string(), s.index, "dist", eval.dist(&s.theta)));
            if let Some(r) = eval.rms(&s.theta) {
                rows.push(row(i.to_string(), s.index, "rms", r));
            }
        }
    }
    for (index, thetas) in aligned(&result.snapshots) {
        let mean = one_shot_average(&thetas).expect("at least one agent");
        rows.push(row("avg".into(), index, "dist_avg", eval.dist(&mean)));
        let rms: Option<Vec<f64>> = thetas.iter().map(|t| eval.rms(t)).collect();
        if let Some(rms) = rms {
            rows.push(row(
                "avg".into(),
                index,
                "rms_mean",
                rms.iter().sum::<f64>() / rms.len() as f64,
            ));
        }
    }
    rows
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct SpeedupConfig {
    pub experiment: String,
    pub agents: Vec<usize>,
    pub replications: usize,
    /// Run parameters shared by every agent; its cadence sets the curve
    /// points.
    pub spec: RunSpec,
    pub base_seed: u64,
    /// Seed block of the first `N`; the `k`-th entry of `agents` uses
    /// `first_block + k`.
    pub first_block: u64,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub n: usize,
    pub t: u64,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    /// `MSE(N)·N / MSE(N₀)` with `N₀` the first entry (normally 1).
    pub ratio: f64,
}

/// Compares the mean of `‖θ̄ − θ*‖²` with its reconstruction
/// `(1/N²) Σᵢ E‖eᵢ‖² + (2/N²) Σ_{i<j} Ēᵢᵀ Ēⱼ` from per-agent statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCheck {
    pub n: usize,
    pub mse: f64,
    pub reconstructed: f64,
    /// Standard error of the gap, from the per-replication centred cross
    /// term `(2/N²) Σ_{i<j} (eᵢ − Ēᵢ)ᵀ(eⱼ − Ēⱼ)`.
    pub stderr: f64,
    pub z: f64,
}

impl DecompositionCheck {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

#[derive(Debug, Clone)]
pub struct SpeedupSummary {
    pub experiment: String,
    pub rows: Vec<SpeedupRow>,
    pub decomposition: Vec<DecompositionCheck>,
    /// Replication means per `N`: `mse` of `θ̄_t` and `rms_mean`.
    pub curves: Vec<CurveRow>,
}

struct Replicate {
    errors: Vec<Vec<f64>>,
    curve: Vec<(u64, f64, Option<f64>)>,
    t: u64,
}

fn replicate(
    cfg: &SpeedupConfig,
    k: usize,
    r: usize,
    chain: &MarkovRewardProcess,
    features: &FeatureMap,
    eval: &Evaluator,
) -> Result<Replicate> {
    let mut fleet = FleetConfig::new(cfg.agents[k], cfg.spec.clone(), cfg.base_seed);
    fleet.block = cfg.first_block + k as u64;
    fleet.replication = r as u64;
    fleet.execution = Execution::Sequential;
    let result = run_fleet(&fleet, chain, features)?;
    let errors = result
        .finals
        .iter()
        .map(|th| th.iter().zip(eval.theta_star()).map(|(a, b)| a - b).collect())
        .collect();
    let curve = aligned(&result.snapshots)
        .into_iter()
        .map(|(index, thetas)| {
            let mean = one_shot_average(&thetas).expect("at least one agent");
            let rms: Option<Vec<f64>> = thetas.iter().map(|t| eval.rms(t)).collect();
            let rms_mean = rms.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            (index, eval.sq_dist(&mean), rms_mean)
        })
        .collect();
    Ok(Replicate {
        errors,
        curve,
        t: result.steps.iter().copied().max().unwrap_or(0),
    })
}

fn decomposition(n: usize, reps: &[Replicate]) -> DecompositionCheck {
    let n2 = (n * n) as f64;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mse: Vec<f64> = reps
        .iter()
        .map(|rep| {
            let mean = one_shot_average(&rep.errors).expect("at least one agent");
            dot(&mean, &mean)
        })
        .collect();
    let agent_means: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let per_rep: Vec<Vec<f64>> = reps.iter().map(|rep| rep.errors[i].clone()).collect();
            one_shot_average(&per_rep).expect("at least one replication")
        })
        .collect();
    // mean(cross) − reconstruction equals the mean of this centred term
    let cross: Vec<f64> = reps
        .iter()
        .map(|rep| {
            let centred: Vec<Vec<f64>> = rep
                .errors
                .iter()
                .zip(&agent_means)
                .map(|(e, m)| e.iter().zip(m).map(|(a, b)| a - b).collect())
                .collect();
            let mut s = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    s += dot(&centred[i], &centred[j]);
                }
            }
            2.0 * s / n2
        })
        .collect();
    let own: f64 = (0..n)
        .map(|i| reps.iter().map(|rep| dot(&rep.errors[i], &rep.errors[i])).sum::<f64>() / reps.len() as f64)
        .sum::<f64>()
        / n2;
    let mut mean_cross = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mean_cross += dot(&agent_means[i], &agent_means[j]);
        }
    }
    let reconstructed = own + 2.0 * mean_cross / n2;
    let (mse_mean, _) = mean_stderr(&mse);
    let (_, stderr) = mean_stderr(&cross);
    let gap = mse_mean - reconstructed;
    let z = if gap == 0.0 { 0.0 } else { gap / stderr };
    DecompositionCheck {
        n,
        mse: mse_mean,
        reconstructed,
        stderr,
        z,
    }
}

/// Runs `replications` independent fleets for each `N` and reports the
/// final-step MSE of `θ̄_T`, the `N`-scaled ratios and the decomposition
/// check. Every `(N, replication, agent)` triple has its own stream.
pub fn speedup_experiment(
    cfg: &SpeedupConfig,
    chain: &MarkovRewardProcess,
    features: &FeatureMap,
    eval: &Evaluator,
) -> Result<SpeedupSummary> {
    if cfg.agents.is_empty() || cfg.agents.contains(&0) {
        return Err(Error::invalid("agents", "need a non-empty list of positive sizes"));
    }
    if cfg.replications == 0 {
        return Err(Error::invalid("replications", "need at least one"));
    }
    if cfg.first_block + cfg.agents.len() as u64 - 1 > MAX_BLOCK {
        return Err(Error::invalid(
            "seed block",
            "too many agent counts for the block range",
        ));
    }
    cfg.spec.validate(chain, features)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.agents.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    let run = |&(k, r): &(usize, usize)| replicate(cfg, k, r, chain, features, eval);
    let results: Vec<Result<Replicate>> = match cfg.execution {
        Execution::Sequential => jobs.iter().map(run).collect(),
        Execution::Parallel => jobs.par_iter().map(run).collect(),
        Execution::ParallelCapped(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(|| jobs.par_iter().map(run).collect()),
    };
    let mut results = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter();

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    for &n in &cfg.agents {
        let reps: Vec<Replicate> = results.by_ref().take(cfg.replications).collect();
        let finals: Vec<f64> = reps
            .iter()
            .map(|rep| {
                let mean = one_shot_average(&rep.errors).expect("at least one agent");
                mean.iter().map(|x| x * x).sum()
            })
            .collect();
        let (mse_mean, mse_stderr) = mean_stderr(&finals);
        rows.push(SpeedupRow {
            n,
            t: reps.iter().map(|r| r.t).max().unwrap_or(0),
            mse_mean,
            mse_stderr,
            ratio: f64::NAN,
        });
        if n > 1 {
            checks.push(decomposition(n, &reps));
        }

        let mut by_index: BTreeMap<u64, (f64, f64, usize, bool)> = BTreeMap::new();
        for rep in &reps {
            for &(index, sq, rms) in &rep.curve {
                let e = by_index.entry(index).or_insert((0.0, 0.0, 0, true));
                e.0 += sq;
                match rms {
                    Some(v) => e.1 += v,
                    None => e.3 = false,
                }
                e.2 += 1;
            }
        }
        let experiment = format!("{}-n{n}", cfg.experiment);
        for (index, (sq, rms, count, has_rms)) in by_index {
            let row = |metric, value| CurveRow {
                experiment: experiment.clone(),
                replication: "all".into(),
                agent: "avg".into(),
                index,
                metric,
                value,
            };
            curves.push(row("mse", sq / count as f64));
            if has_rms {
                curves.push(row("rms_mean", rms / count as f64));
            }
        }
    }
    let base = rows[0].mse_mean * rows[0].n as f64;
    for row in &mut rows {
        row.ratio = row.mse_mean * row.n as f64 / base;
    }
    Ok(SpeedupSummary {
        experiment: cfg.experiment.clone(),
        rows,
        decomposition: checks,
        curves,
    })
}

/// One line of the Markov-noise table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRow {
    pub t: usize,
    /// `‖ḡ'(θ) − ḡ(θ)‖` at step `t` from `s₀`.
    pub noise: f64,
    /// `m ρ^t (r_max + 2‖θ − θ*‖ + 2‖θ*‖)`.
    pub envelope: f64,
    /// `d(t)` from the mixing profile.
    pub distance: f64,
}

/// Exact Markov noise against its geometric envelope for `t = 0..=t_max`.
pub fn markov_noise_probe(gt: &GroundTruth, theta: &Vector, start: usize, t_max: usize) -> Result<Vec<NoiseRow>> {
    let profile = crate::chain::mixing_profile(gt.chain(), t_max.max(2))?;
    let noise = gt.markov_noise_profile(theta, start, t_max)?;
    let scale = gt.r_max() + 2.0 * (theta - gt.theta_star()).norm() + 2.0 * gt.theta_star().norm();
    Ok(noise
        .iter()
        .enumerate()
        .map(|(t, g)| NoiseRow {
            t,
            noise: g.norm(),
            envelope: profile.envelope(t) * scale,
            distance: profile.distances()[t],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub status: EnvelopeStatus,
    pub threshold: u64,
    /// `max (t+1)·MSE(t)` over the first third of the window after the
    /// threshold.
    pub constant: f64,
    /// Largest `(t+1)·MSE(t) / constant` over the rest of the window.
    pub worst_ratio: f64,
    /// `(t, MSE(t), standard error)` at every recorded step.
    pub points: Vec<(u64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EnvelopeConfig {
    pub lambda: Option<f64>,
    pub spec: RunSpec,
    pub replications: usize,
    pub base_seed: u64,
    /// Points are recorded every `interval` steps.
    pub interval: u64,
    /// Allowed relative excess over the fitted constant.
    pub tolerance: f64,
    pub execution: Execution,
}

/// Checks that `(t+1)·E‖θ_t − θ*‖²` stays below the constant fitted on the
/// first third of the window `(t_th, T]`.
pub fn centralized_envelope_check(gt: &GroundTruth, cfg: &EnvelopeConfig) -> Result<EnvelopeReport> {
    let not_applicable = |threshold| EnvelopeReport {
        status: EnvelopeStatus::NotApplicable,
        threshold,
        constant: f64::NAN,
        worst_ratio: f64::NAN,
        points: Vec::new(),
    };
    if !cfg.spec.schedule.is_decaying() {
        return Ok(not_applicable(0));
    }
    if cfg.replications == 0 || cfg.interval == 0 {
        return Err(Error::invalid("envelope", "replications and interval must be positive"));
    }
    let profile = crate::chain::mixing_profile(gt.chain(), 200)?;
    let threshold = match cfg.lambda {
        None => {
            let tau = crate::truth::schedule_mixing_time(&profile, &cfg.spec.schedule);
            td0_threshold(tau, gt.omega(), gt.gamma())
        }
        Some(lambda) => {
            let gl = gt.gamma() * lambda;
            let tau = crate::truth::schedule_mixing_time_lambda(&profile, gl, &cfg.spec.schedule);
            tdlambda_threshold(tau, gt.omega(), gt.kappa(), gl)
        }
    };
    let Horizon::Steps(horizon) = cfg.spec.horizon else {
        return Err(Error::invalid("horizon", "the envelope check needs a step budget"));
    };
    if horizon <= threshold {
        return Err(Error::invalid(
            "horizon",
            format!("T = {horizon} does not exceed the threshold {threshold}; use a longer horizon"),
        ));
    }
    let eval = Evaluator::from_truth(gt, cfg.lambda.is_some())?;
    let spec = cfg.spec.clone().with_cadence(Cadence::Steps(cfg.interval));
    let speed = SpeedupConfig {
        experiment: "envelope".into(),
        agents: vec![1],
        replications: cfg.replications,
        spec,
        base_seed: cfg.base_seed,
        first_block: 0,
        execution: cfg.execution,
    };
    let jobs: Vec<usize> = (0..cfg.replications).collect();
    let run = |&r: &usize| replicate(&speed, 0, r, gt.chain(), gt.features(), &eval);
    let reps: Vec<Replicate> = match cfg.execution {
        Execution::Sequential => jobs.iter().map(run).collect::<Result<_>>()?,
        _ => jobs.par_iter().map(run).collect::<Result<_>>()?,
    };
    let mut by_index: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for rep in &reps {
        for &(index, sq, _) in &rep.curve {
            by_index.entry(index).or_default().push(sq);
        }
    }
    let points: Vec<(u64, f64, f64)> = by_index
        .into_iter()
        .map(|(t, xs)| {
            let (m, se) = mean_stderr(&xs);
            (t, m, se)
        })
        .collect();
    let window: Vec<&(u64, f64, f64)> = points.iter().filter(|p| p.0 > threshold).collect();
    let fit_end = threshold + (horizon - threshold) / 3;
    let scaled = |p: &(u64, f64, f64)| (p.0 + 1) as f64 * p.1;
    let constant = window
        .iter()
        .filter(|p| p.0 <= fit_end)
        .map(|p| scaled(p))
        .fold(f64::NAN, f64::max);
    let rest: Vec<f64> = window.iter().filter(|p| p.0 > fit_end).map(|p| scaled(p)).collect();
    if constant.is_nan() || rest.is_empty() {
        return Err(Error::invalid(
            "interval",
            "too few recorded points after the threshold to fit and check",
        ));
    }
    let worst_ratio = rest.iter().fold(0.0_f64, |m, v| m.max(v / constant));
    Ok(EnvelopeReport {
        status: if worst_ratio <= 1.0 + cfg.tolerance {
            EnvelopeStatus::Pass
        } else {
            EnvelopeStatus::Fail
        },
        threshold,
        constant,
        worst_ratio,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        let truth: Vec<f64> = (1..=5).map(|k| k as f64 / 6.0).collect();
        assert_eq!(rms_error(&truth, &truth).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|v| v + 1.0).collect();
        assert!((rms_error(&shifted, &truth).unwrap() - 1.0).abs() < 1e-15);
        let expected = (55.0_f64 / 180.0).sqrt();
        assert!((rms_error(&[0.0; 5], &truth).unwrap() - expected).abs() < 1e-15);
        assert!(rms_error(&[0.0; 4], &truth).is_err());
    }

    #[test]
    fn mean_stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
