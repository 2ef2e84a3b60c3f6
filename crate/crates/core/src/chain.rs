//! Finite MDPs, policy-induced Markov reward processes, stationary
//! distributions, exact value functions and mixing profiles.
//!
//! A [`MarkovRewardProcess`] stores its dynamics as per-state outcome lists.
//! Each outcome carries the successor, its probability, the reward received
//! and whether the transition is a rewritten episode termination (a
//! *restart* into the designated start state). From the outcomes we derive
//! the sampling kernel `P`, the expected reward `r(s)` and the bootstrap
//! kernel `B` used by every Bellman-type quantity:
//!
//! * continuing regime: `B = P`;
//! * episodic regime: `B = P` with restart transitions removed, so a
//!   termination bootstraps from a zero terminal value.
//!
//! The stationary distribution and all mixing quantities always use `P`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

pub(crate) const ROW_TOL: f64 = 1e-12;

fn check_row(what: &str, row: String, values: impl Iterator<Item = f64>) -> Result<()> {
    let (sum, min) = values.fold((0.0, f64::INFINITY), |(s, m), v| (s + v, m.min(v)));
    if (sum - 1.0).abs() > ROW_TOL || min < 0.0 || !sum.is_finite() {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            row,
            sum,
            min,
        });
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} is outside (0, 1]")));
    }
    Ok(())
}

/// A finite MDP `(S, A, P_env, r, γ)` with an optional episodic structure.
#[derive(Debug, Clone)]
pub struct Mdp {
    /// `transitions[a][(s, s')] = P_env(s' | s, a)`.
    transitions: Vec<Matrix>,
    reward: Matrix,
    gamma: f64,
    r_max: f64,
    start_state: Option<usize>,
    terminal_states: Vec<usize>,
}

impl Mdp {
    pub fn new(transitions: Vec<Matrix>, reward: Matrix, gamma: f64) -> Result<Self> {
        let Some(first) = transitions.first() else {
            return Err(Error::invalid("actions", "at least one action is required"));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(Error::invalid("states", "at least one state is required"));
        }
        for p in &transitions {
            if p.nrows() != n {
                return Err(Error::Dimension {
                    axis: "transition source states",
                    expected: n,
                    found: p.nrows(),
                });
            }
            if p.ncols() != n {
                return Err(Error::Dimension {
                    axis: "transition target states",
                    expected: n,
                    found: p.ncols(),
                });
            }
        }
        if reward.nrows() != n || reward.ncols() != n {
            return Err(Error::Dimension {
                axis: "reward states",
                expected: n,
                found: if reward.nrows() != n {
                    reward.nrows()
                } else {
                    reward.ncols()
                },
            });
        }
        check_gamma(gamma)?;
        let r_max = reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        let mdp = Mdp {
            transitions,
            reward,
            gamma,
            r_max,
            start_state: None,
            terminal_states: Vec::new(),
        };
        mdp.validate_rows()?;
        Ok(mdp)
    }

    /// Marks terminal states and the state every episode (re)starts from.
    /// Rows of terminal states are never used.
    pub fn with_episodes(mut self, start: usize, terminals: Vec<usize>) -> Result<Self> {
        let n = self.num_states();
        if start >= n {
            return Err(Error::invalid("start_state", format!("{start} >= {n} states")));
        }
        if let Some(t) = terminals.iter().find(|&&t| t >= n) {
            return Err(Error::invalid("terminal_states", format!("{t} >= {n} states")));
        }
        if terminals.contains(&start) {
            return Err(Error::invalid("start_state", "start state cannot be terminal"));
        }
        self.start_state = Some(start);
        self.terminal_states = terminals;
        self.validate_rows()?;
        Ok(self)
    }

    /// Overrides the reward bound; must dominate every stored reward.
    pub fn with_r_max(mut self, r_max: f64) -> Result<Self> {
        if !(r_max >= self.r_max) {
            return Err(Error::invalid(
                "r_max",
                format!("{r_max} is below the largest |reward| {}", self.r_max),
            ));
        }
        self.r_max = r_max;
        Ok(self)
    }

    fn validate_rows(&self) -> Result<()> {
        for (a, p) in self.transitions.iter().enumerate() {
            for s in 0..p.nrows() {
                if self.terminal_states.contains(&s) {
                    continue;
                }
                check_row(
                    "transitions",
                    format!("(state {s}, action {a})"),
                    p.row(s).iter().copied(),
                )?;
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.reward.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn transitions(&self, action: usize) -> &Matrix {
        &self.transitions[action]
    }

    pub fn reward(&self) -> &Matrix {
        &self.reward
    }

    pub fn start_state(&self) -> Option<usize> {
        self.start_state
    }

    pub fn terminal_states(&self) -> &[usize] {
        &self.terminal_states
    }
}

/// `π(a | s)`, one row per state.
#[derive(Debug, Clone)]
pub struct Policy {
    probs: Matrix,
}

impl Policy {
    pub fn new(probs: Matrix) -> Result<Self> {
        for s in 0..probs.nrows() {
            check_row("policy", format!("state {s}"), probs.row(s).iter().copied())?;
        }
        Ok(Policy { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy {
            probs: Matrix::from_element(num_states, num_actions, 1.0 / num_actions as f64),
        }
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }
}

/// Whether rewritten terminations cut bootstrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Continuing,
    Episodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
    /// A rewritten termination: the chain jumps to the start state.
    pub restart: bool,
}

/// The policy-induced chain `P_π`, rewards and discount.
#[derive(Debug, Clone)]
pub struct MarkovRewardProcess {
    outcomes: Vec<Vec<Outcome>>,
    cumulative: Vec<Vec<f64>>,
    kernel: Matrix,
    bootstrap: Matrix,
    expected_reward: Vector,
    gamma: f64,
    r_max: f64,
    regime: Regime,
    start: Option<usize>,
}

impl MarkovRewardProcess {
    /// A continuing chain with pair rewards `r(s, s')`.
    pub fn new(kernel: Matrix, reward: Matrix, gamma: f64) -> Result<Self> {
        let n = kernel.nrows();
        if kernel.ncols() != n {
            return Err(Error::Dimension {
                axis: "kernel columns",
                expected: n,
                found: kernel.ncols(),
            });
        }
        if reward.nrows() != n || reward.ncols() != n {
            return Err(Error::Dimension {
                axis: "reward states",
                expected: n,
                found: reward.nrows(),
            });
        }
        let outcomes = (0..n)
            .map(|s| {
                (0..n)
                    .filter(|&t| kernel[(s, t)] != 0.0)
                    .map(|t| Outcome {
                        next: t,
                        prob: kernel[(s, t)],
                        reward: reward[(s, t)],
                        restart: false,
                    })
                    .collect()
            })
            .collect();
        let r_max = reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Self::from_outcomes(outcomes, gamma, r_max, Regime::Continuing, None)
    }

    /// A continuing chain whose reward depends only on the current state.
    pub fn with_state_rewards(kernel: Matrix, reward: &Vector, gamma: f64) -> Result<Self> {
        let n = kernel.nrows();
        if reward.len() != n {
            return Err(Error::Dimension {
                axis: "reward states",
                expected: n,
                found: reward.len(),
            });
        }
        let pair = Matrix::from_fn(n, n, |s, _| reward[s]);
        Self::new(kernel, pair, gamma)
    }

    pub fn from_outcomes(
        outcomes: Vec<Vec<Outcome>>,
        gamma: f64,
        r_max: f64,
        regime: Regime,
        start: Option<usize>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::invalid("states", "at least one state is required"));
        }
        check_gamma(gamma)?;
        let mut kernel = Matrix::zeros(n, n);
        let mut bootstrap = Matrix::zeros(n, n);
        let mut expected_reward = Vector::zeros(n);
        let mut observed_max = 0.0_f64;
        for (s, row) in outcomes.iter().enumerate() {
            check_row("kernel", format!("state {s}"), row.iter().map(|o| o.prob))?;
            for o in row {
                if o.next >= n {
                    return Err(Error::Dimension {
                        axis: "successor state",
                        expected: n,
                        found: o.next,
                    });
                }
                if o.restart && start != Some(o.next) {
                    return Err(Error::invalid(
                        "outcomes",
                        format!("restart from state {s} must lead to the start state"),
                    ));
                }
                kernel[(s, o.next)] += o.prob;
                if !(o.restart && regime == Regime::Episodic) {
                    bootstrap[(s, o.next)] += o.prob;
                }
                expected_reward[s] += o.prob * o.reward;
                observed_max = observed_max.max(o.reward.abs());
            }
        }
        if !(r_max >= observed_max) {
            return Err(Error::invalid(
                "r_max",
                format!("{r_max} is below the largest |reward| {observed_max}"),
            ));
        }
        let cumulative = outcomes
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|o| {
                        acc += o.prob;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(MarkovRewardProcess {
            outcomes,
            cumulative,
            kernel,
            bootstrap,
            expected_reward,
            gamma,
            r_max,
            regime,
            start,
        })
    }

    /// Same dynamics read as a continuing task: restarts bootstrap through.
    pub fn continuing(&self) -> Self {
        Self::from_outcomes(
            self.outcomes.clone(),
            self.gamma,
            self.r_max,
            Regime::Continuing,
            self.start,
        )
        .expect("outcomes were already validated")
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::from_outcomes(self.outcomes.clone(), gamma, self.r_max, self.regime, self.start)
    }

    pub fn num_states(&self) -> usize {
        self.kernel.nrows()
    }

    /// Sampling kernel `P`.
    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    /// Kernel used for bootstrapping; equals `P` in the continuing regime.
    pub fn bootstrap_kernel(&self) -> &Matrix {
        &self.bootstrap
    }

    pub fn expected_reward(&self) -> &Vector {
        &self.expected_reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn start_state(&self) -> Option<usize> {
        self.start
    }

    pub fn outcomes(&self, s: usize) -> &[Outcome] {
        &self.outcomes[s]
    }

    pub(crate) fn cumulative(&self, s: usize) -> &[f64] {
        &self.cumulative[s]
    }

    /// Whether an outcome cuts bootstrapping in this chain's regime.
    pub fn terminates(&self, o: &Outcome) -> bool {
        o.restart && self.regime == Regime::Episodic
    }
}

/// Builds `P_π(s'|s) = Σ_a P_env(s'|s,a) π(a|s)` with pair rewards. Terminal
/// states are dropped and transitions into them become restarts into the
/// start state carrying the terminal reward.
pub fn build_induced_chain(mdp: &Mdp, policy: &Policy) -> Result<MarkovRewardProcess> {
    let n = mdp.num_states();
    let probs = policy.probs();
    if probs.nrows() != n {
        return Err(Error::Dimension {
            axis: "policy states",
            expected: n,
            found: probs.nrows(),
        });
    }
    if probs.ncols() != mdp.num_actions() {
        return Err(Error::Dimension {
            axis: "policy actions",
            expected: mdp.num_actions(),
            found: probs.ncols(),
        });
    }
    let terminals = mdp.terminal_states();
    let index: Vec<Option<usize>> = {
        let mut next = 0;
        (0..n)
            .map(|s| {
                if terminals.contains(&s) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let start = mdp.start_state().and_then(|s| index[s]);

    let mut outcomes = Vec::with_capacity(n - terminals.len());
    for s in (0..n).filter(|s| index[*s].is_some()) {
        let mut row = vec![0.0; n];
        for a in 0..mdp.num_actions() {
            let pa = probs[(s, a)];
            if pa == 0.0 {
                continue;
            }
            let env = mdp.transitions(a);
            for (t, acc) in row.iter_mut().enumerate() {
                *acc += env[(s, t)] * pa;
            }
        }
        let mut list = Vec::new();
        for (t, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let reward = mdp.reward()[(s, t)];
            match index[t] {
                Some(next) => list.push(Outcome {
                    next,
                    prob: p,
                    reward,
                    restart: false,
                }),
                None => list.push(Outcome {
                    next: start.expect("episodic MDPs always carry a start state"),
                    prob: p,
                    reward,
                    restart: true,
                }),
            }
        }
        outcomes.push(list);
    }
    let regime = if terminals.is_empty() {
        Regime::Continuing
    } else {
        Regime::Episodic
    };
    MarkovRewardProcess::from_outcomes(outcomes, mdp.gamma(), mdp.r_max(), regime, start)
}

/// The stationary distribution `μ` and its weighting `D = diag(μ)`.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    mu: Vector,
}

impl StationaryDistribution {
    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn weighting(&self) -> Matrix {
        linalg::diag(&self.mu)
    }

    /// `‖μᵀP − μᵀ‖_∞`.
    pub fn residual(&self, kernel: &Matrix) -> f64 {
        let left = kernel.tr_mul(&self.mu);
        linalg::inf_norm(&(left - &self.mu))
    }
}

fn support_reach(kernel: &Matrix, from: usize, transpose: bool) -> Vec<Option<usize>> {
    let n = kernel.nrows();
    let mut level = vec![None; n];
    level[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap_or(0);
        for v in 0..n {
            let w = if transpose { kernel[(v, u)] } else { kernel[(u, v)] };
            if w > 0.0 && level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility (strong connectivity of the support graph) and
/// aperiodicity (gcd of cycle lengths through BFS levels from state 0).
pub fn check_ergodic(kernel: &Matrix) -> Result<()> {
    let n = kernel.nrows();
    let forward = support_reach(kernel, 0, false);
    if let Some(s) = forward.iter().position(Option::is_none) {
        return Err(Error::NotErgodic(format!("state {s} is unreachable from state 0")));
    }
    let backward = support_reach(kernel, 0, true);
    if let Some(s) = backward.iter().position(Option::is_none) {
        return Err(Error::NotErgodic(format!("state 0 is unreachable from state {s}")));
    }
    let mut period = 0;
    for u in 0..n {
        for v in 0..n {
            if kernel[(u, v)] > 0.0 {
                let (lu, lv) = (forward[u].unwrap_or(0), forward[v].unwrap_or(0));
                period = gcd(period, (lu + 1).abs_diff(lv));
            }
        }
    }
    if period != 1 {
        return Err(Error::NotErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

pub fn stationary_distribution(chain: &MarkovRewardProcess) -> Result<StationaryDistribution> {
    stationary_of_kernel(chain.kernel())
}

pub fn stationary_of_kernel(kernel: &Matrix) -> Result<StationaryDistribution> {
    check_ergodic(kernel)?;
    let n = kernel.nrows();
    let direct = {
        let mut a = kernel.transpose() - Matrix::identity(n, n);
        a.row_mut(n - 1).fill(1.0);
        let mut b = Vector::zeros(n);
        b[n - 1] = 1.0;
        linalg::solve(&a, &b, "stationary system").ok()
    };
    let accept = |mu: Vector| -> Option<StationaryDistribution> {
        let total: f64 = mu.sum();
        let mu = mu / total;
        let dist = StationaryDistribution { mu };
        (dist.residual(kernel) < 1e-10 && dist.mu.iter().all(|&m| m > 0.0)).then_some(dist)
    };
    if let Some(dist) = direct.and_then(accept) {
        return Ok(dist);
    }
    let mut mu = Vector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITERS {
        let next = kernel.tr_mul(&mu);
        let delta = linalg::inf_norm(&(&next - &mu));
        mu = next;
        if delta < POWER_TOL {
            if let Some(dist) = accept(mu.clone()) {
                return Ok(dist);
            }
            break;
        }
    }
    Err(Error::NotErgodic(
        "power iteration did not converge to a positive μ".into(),
    ))
}

/// Solves `(I − γB) V = r`. In the episodic regime this is the system on
/// transient states with a zero terminal value.
pub fn value_function_exact(chain: &MarkovRewardProcess) -> Result<Vector> {
    let n = chain.num_states();
    if chain.gamma() >= 1.0 && chain.regime() == Regime::Continuing {
        return Err(Error::Singular(
            "I − P is singular for an undiscounted continuing chain".into(),
        ));
    }
    let a = Matrix::identity(n, n) - chain.bootstrap_kernel() * chain.gamma();
    linalg::solve(&a, chain.expected_reward(), "I − γP")
}

/// Exact distances `d(t) = max_s ‖P_t(·|s) − μ‖₁` and a fitted envelope
/// `m ρ^t` dominating them.
#[derive(Debug, Clone)]
pub struct MixingProfile {
    distances: Vec<f64>,
    m: f64,
    rho: f64,
    degenerate: bool,
}

const FIT_FLOOR: f64 = 1e-12;

impl MixingProfile {
    pub fn compute(kernel: &Matrix, mu: &Vector, t_max: usize) -> Result<Self> {
        if t_max < 2 {
            return Err(Error::invalid("t_max", format!("{t_max} < 2")));
        }
        let n = kernel.nrows();
        let mut power = Matrix::identity(n, n);
        let mut distances = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            if t > 0 {
                power = &power * kernel;
            }
            let d = (0..n)
                .map(|s| (0..n).map(|j| (power[(s, j)] - mu[j]).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            distances.push(d);
        }
        let points: Vec<(f64, f64)> = distances
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > FIT_FLOOR)
            .map(|(t, &d)| (t as f64, d.ln()))
            .collect();
        if points.len() < 2 {
            return Ok(MixingProfile {
                m: distances[0].max(f64::MIN_POSITIVE),
                rho: 0.0,
                degenerate: true,
                distances,
            });
        }
        let k = points.len() as f64;
        let mean_t = points.iter().map(|p| p.0).sum::<f64>() / k;
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
        let slope = sxy / sxx;
        let intercept = mean_y - slope * mean_t;
        let rho = slope.exp();
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::NoMixing(rho));
        }
        let needed = points
            .iter()
            .map(|&(t, ln_d)| (ln_d - t * slope).exp())
            .fold(0.0, f64::max);
        let m = intercept.exp().max(needed);
        Ok(MixingProfile {
            distances,
            m,
            rho,
            degenerate: false,
        })
    }

    /// `d(t)` for `t = 0..=t_max`.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Set when `d(t) = 0` for every `t ≥ 1`; then `ρ = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn envelope(&self, t: usize) -> f64 {
        self.m * self.rho.powi(t as i32)
    }

    /// First tabulated `t` with `d(t) < threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.distances.iter().position(|&d| d < threshold)
    }
}

pub fn mixing_profile(chain: &MarkovRewardProcess, t_max: usize) -> Result<MixingProfile> {
    let dist = stationary_distribution(chain)?;
    MixingProfile::compute(chain.kernel(), dist.mu(), t_max)
}

/// `min{t : scale · base^t ≤ ε}` for `0 ≤ base < 1`.
pub(crate) fn geometric_threshold(scale: f64, base: f64, eps: f64) -> u64 {
    if scale <= eps {
        return 0;
    }
    if base == 0.0 {
        return 1;
    }
    let guess = ((eps / scale).ln() / base.ln()).ceil().max(1.0) as u64;
    let above = |t: u64| scale * base.powi(t as i32) > eps;
    let mut t = guess;
    while t > 1 && !above(t - 1) {
        t -= 1;
    }
    while above(t) {
        t += 1;
    }
    t
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", format!("{eps} must be positive")));
    }
    Ok(())
}

/// `τ_mix(ε) = min{t : m ρ^t ≤ ε}`.
pub fn mixing_time(profile: &MixingProfile, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    if profile.rho >= 1.0 {
        return Err(Error::NoMixing(profile.rho));
    }
    Ok(geometric_threshold(profile.m, profile.rho, eps))
}

/// `τ_mix^(λ)(ε) = max{τ_mix(ε), min{t : (γλ)^t ≤ ε}}`, with the second
/// term taken as 0 when `γλ = 0`.
pub fn mixing_time_lambda(profile: &MixingProfile, gamma_lambda: f64, eps: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&gamma_lambda) {
        return Err(Error::invalid(
            "gamma*lambda",
            format!("{gamma_lambda} is outside [0, 1)"),
        ));
    }
    let base = mixing_time(profile, eps)?;
    let trace = if gamma_lambda == 0.0 {
        0
    } else {
        geometric_threshold(1.0, gamma_lambda, eps)
    };
    Ok(base.max(trace))
}
