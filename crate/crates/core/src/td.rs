//! TD(0) and TD(λ) with linear features under Markov sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{MarkovRewardProcess, Regime};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::dot;

/// Step-size sequence `α_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `α_t = 2/(ω(t+1)(1−γ))`
    Td0Decay {
        omega: f64,
        gamma: f64,
    },
    /// `α_t = 2/(ω(t+1)(1−κ))`
    TdLambdaDecay {
        omega: f64,
        kappa: f64,
    },
    Constant(f64),
}

impl StepSchedule {
    pub fn td0_decay(omega: f64, gamma: f64) -> Self {
        StepSchedule::Td0Decay { omega, gamma }
    }

    pub fn tdlambda_decay(omega: f64, kappa: f64) -> Self {
        StepSchedule::TdLambdaDecay { omega, kappa }
    }

    pub fn constant(alpha: f64) -> Self {
        StepSchedule::Constant(alpha)
    }

    #[inline]
    pub fn alpha(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Td0Decay { omega, gamma } => 2.0 / (omega * (t + 1) as f64 * (1.0 - gamma)),
            StepSchedule::TdLambdaDecay { omega, kappa } => 2.0 / (omega * (t + 1) as f64 * (1.0 - kappa)),
            StepSchedule::Constant(alpha) => alpha,
        }
    }

    pub fn is_decaying(&self) -> bool {
        !matches!(self, StepSchedule::Constant(_))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Td0Decay { omega, gamma } => omega > 0.0 && gamma < 1.0,
            StepSchedule::TdLambdaDecay { omega, kappa } => omega > 0.0 && kappa < 1.0,
            StepSchedule::Constant(alpha) => alpha > 0.0 && alpha.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "schedule",
                format!("{self:?} does not give positive finite steps"),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Td0,
    TdLambda(f64),
}

impl Variant {
    pub fn lambda(&self) -> f64 {
        match *self {
            Variant::Td0 => 0.0,
            Variant::TdLambda(l) => l,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Variant::Td0 => "td0".into(),
            Variant::TdLambda(l) => format!("tdlambda({l})"),
        }
    }
}

/// One sampled step `s → s'` with its reward. `terminal` cuts bootstrapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// `δ = r + γφ(s')ᵀθ − φ(s)ᵀθ`; pass `None` for `φ(s')` on a terminal step.
#[inline]
pub fn td_error(theta: &[f64], phi_s: &[f64], phi_next: Option<&[f64]>, reward: f64, gamma: f64) -> f64 {
    let next = phi_next.map_or(0.0, |p| dot(p, theta));
    reward + gamma * next - dot(phi_s, theta)
}

/// One learner's mutable state.
#[derive(Debug, Clone)]
pub struct AgentState {
    theta: Vec<f64>,
    trace: Vec<f64>,
    state: usize,
    t: u64,
    episodes: u64,
    rng: ChaCha8Rng,
}

impl AgentState {
    pub fn new(theta: Vec<f64>, state: usize, rng: ChaCha8Rng) -> Self {
        let trace = vec![0.0; theta.len()];
        AgentState {
            theta,
            trace,
            state,
            t: 0,
            episodes: 0,
            rng,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Number of terminal transitions seen.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn advance(&mut self, tr: &Transition) -> Result<()> {
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                agent: None,
                step: self.t,
            });
        }
        self.state = tr.to;
        self.t += 1;
        if tr.terminal {
            self.episodes += 1;
        }
        Ok(())
    }
}

fn check_from(agent: &AgentState, tr: &Transition) -> Result<()> {
    if tr.from != agent.state {
        return Err(Error::invalid(
            "transition",
            format!("starts at {} but the agent is in state {}", tr.from, agent.state),
        ));
    }
    Ok(())
}

/// `θ ← θ + α δ φ(s)`.
pub fn td0_step(agent: &mut AgentState, features: &FeatureMap, gamma: f64, tr: &Transition, alpha: f64) -> Result<()> {
    check_from(agent, tr)?;
    let phi_s = features.row(tr.from);
    let phi_next = (!tr.terminal).then(|| features.row(tr.to));
    let scale = alpha * td_error(&agent.theta, phi_s, phi_next, tr.reward, gamma);
    for (w, &f) in agent.theta.iter_mut().zip(phi_s) {
        *w += scale * f;
    }
    agent.advance(tr)
}

/// `z ← γλ z + φ(s)`, then `θ ← θ + α δ z`. The trace is cleared after a
/// terminal step.
pub fn tdlambda_step(
    agent: &mut AgentState,
    features: &FeatureMap,
    gamma: f64,
    gamma_lambda: f64,
    tr: &Transition,
    alpha: f64,
) -> Result<()> {
    check_from(agent, tr)?;
    let phi_s = features.row(tr.from);
    for (z, &f) in agent.trace.iter_mut().zip(phi_s) {
        *z = gamma_lambda * *z + f;
    }
    let phi_next = (!tr.terminal).then(|| features.row(tr.to));
    let scale = alpha * td_error(&agent.theta, phi_s, phi_next, tr.reward, gamma);
    for (w, &z) in agent.theta.iter_mut().zip(&agent.trace) {
        *w += scale * z;
    }
    if tr.terminal {
        agent.trace.iter_mut().for_each(|z| *z = 0.0);
    }
    agent.advance(tr)
}

/// Draws the next outcome from row `s` by inverse CDF on one uniform.
#[inline]
pub fn sample_transition<R: Rng + ?Sized>(chain: &MarkovRewardProcess, s: usize, rng: &mut R) -> Transition {
    let u: f64 = rng.random();
    let cdf = chain.cumulative(s);
    let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
    let o = &chain.outcomes(s)[k];
    Transition {
        from: s,
        to: o.next,
        reward: o.reward,
        terminal: chain.terminates(o),
    }
}

/// Where an agent starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartDistribution {
    /// The chain's start state when it has one, otherwise state 0.
    #[default]
    Default,
    State(usize),
    /// Sampled once from these probabilities.
    Weights(Vec<f64>),
}

impl StartDistribution {
    pub fn draw<R: Rng + ?Sized>(&self, chain: &MarkovRewardProcess, rng: &mut R) -> Result<usize> {
        let n = chain.num_states();
        match self {
            StartDistribution::Default => Ok(chain.start_state().unwrap_or(0)),
            StartDistribution::State(s) if *s < n => Ok(*s),
            StartDistribution::State(s) => Err(Error::invalid("start state", format!("{s} >= {n} states"))),
            StartDistribution::Weights(w) => {
                if w.len() != n {
                    return Err(Error::Dimension {
                        axis: "start weights",
                        expected: n,
                        found: w.len(),
                    });
                }
                let total: f64 = w.iter().sum();
                if w.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(
                        "start weights",
                        format!("not a distribution (sum {total})"),
                    ));
                }
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, &p) in w.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(s);
                    }
                }
                Ok(w.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            }
        }
    }
}

/// Run length, in steps or completed episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Steps(u64),
    Episodes(u64),
}

/// When to store a snapshot of `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cadence {
    /// Only the final parameters.
    #[default]
    Final,
    /// At `t = 0, k, 2k, …` and the final step.
    Steps(u64),
    /// At episode counts `0, k, 2k, …` and the end of the run.
    Episodes(u64),
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub variant: Variant,
    pub schedule: StepSchedule,
    pub horizon: Horizon,
    pub theta0: Option<Vec<f64>>,
    pub start: StartDistribution,
    pub cadence: Cadence,
}

impl RunSpec {
    pub fn new(variant: Variant, schedule: StepSchedule, horizon: Horizon) -> Self {
        RunSpec {
            variant,
            schedule,
            horizon,
            theta0: None,
            start: StartDistribution::Default,
            cadence: Cadence::Final,
        }
    }

    pub fn with_cadence(mut self, cadence: Cadence) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn with_start(mut self, start: StartDistribution) -> Self {
        self.start = start;
        self
    }

    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Self {
        self.theta0 = Some(theta0);
        self
    }

    pub fn validate(&self, chain: &MarkovRewardProcess, features: &FeatureMap) -> Result<()> {
        self.schedule.validate()?;
        if features.num_states() != chain.num_states() {
            return Err(Error::Dimension {
                axis: "feature rows",
                expected: chain.num_states(),
                found: features.num_states(),
            });
        }
        if let Some(theta0) = &self.theta0 {
            if theta0.len() != features.dim() {
                return Err(Error::Dimension {
                    axis: "theta0",
                    expected: features.dim(),
                    found: theta0.len(),
                });
            }
        }
        let lambda = self.variant.lambda();
        if !(0.0..=1.0).contains(&lambda) || chain.gamma() * lambda >= 1.0 {
            return Err(Error::invalid("lambda", format!("{lambda} needs 0 ≤ λ ≤ 1 and γλ < 1")));
        }
        if let Horizon::Episodes(_) = self.horizon {
            if chain.regime() != Regime::Episodic {
                return Err(Error::invalid("horizon", "episode budgets need an episodic chain"));
            }
        }
        match self.cadence {
            Cadence::Steps(0) | Cadence::Episodes(0) => Err(Error::invalid("cadence", "interval must be positive")),
            Cadence::Episodes(_) if chain.regime() != Regime::Episodic => {
                Err(Error::invalid("cadence", "episode cadence needs an episodic chain"))
            }
            _ => Ok(()),
        }
    }
}

/// `θ` at a recorded point; `index` is the step or episode count.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: u64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub agent: AgentState,
}

/// Runs one agent from a fresh state drawn with `rng`.
pub fn run_single_agent(
    chain: &MarkovRewardProcess,
    features: &FeatureMap,
    spec: &RunSpec,
    mut rng: ChaCha8Rng,
) -> Result<RunOutput> {
    spec.validate(chain, features)?;
    let start = spec.start.draw(chain, &mut rng)?;
    let theta0 = spec.theta0.clone().unwrap_or_else(|| vec![0.0; features.dim()]);
    let mut agent = AgentState::new(theta0, start, rng);
    let gamma = chain.gamma();
    let gamma_lambda = gamma * spec.variant.lambda();

    let mut snapshots = Vec::new();
    let snap = |agent: &AgentState, index: u64, out: &mut Vec<Snapshot>| {
        out.push(Snapshot {
            index,
            theta: agent.theta.clone(),
        })
    };
    if !matches!(spec.cadence, Cadence::Final) {
        snap(&agent, 0, &mut snapshots);
    }

    let done = |agent: &AgentState| match spec.horizon {
        Horizon::Steps(t) => agent.t >= t,
        Horizon::Episodes(e) => agent.episodes >= e,
    };
    while !done(&agent) {
        let tr = sample_transition(chain, agent.state, &mut agent.rng);
        let alpha = spec.schedule.alpha(agent.t);
        match spec.variant {
            Variant::Td0 => td0_step(&mut agent, features, gamma, &tr, alpha)?,
            Variant::TdLambda(_) => tdlambda_step(&mut agent, features, gamma, gamma_lambda, &tr, alpha)?,
        }
        match spec.cadence {
            Cadence::Steps(k) if agent.t.is_multiple_of(k) => snap(&agent, agent.t, &mut snapshots),
            Cadence::Episodes(k) if tr.terminal && agent.episodes.is_multiple_of(k) => {
                snap(&agent, agent.episodes, &mut snapshots)
            }
            _ => {}
        }
    }

    let final_index = match spec.cadence {
        Cadence::Episodes(_) => agent.episodes,
        _ => agent.t,
    };
    if snapshots.last().is_none_or(|s| s.index != final_index) {
        snap(&agent, final_index, &mut snapshots);
    }
    Ok(RunOutput { snapshots, agent })
}
