//! Exact model-based quantities: stationary points, the expected-update
//! matrices `Σ_I` and `Σ_I^(λ)`, the `T^(λ)` operator, Markov noise and the
//! constants appearing in the finite-time bounds.
//!
//! `ω` is the smallest eigenvalue of `ΦᵀDΦ`. All Bellman-type products use
//! the chain's bootstrap kernel (see [`crate::chain`]).

use crate::chain::{self, MarkovRewardProcess, MixingProfile};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{self, Matrix, Vector};
use crate::td::StepSchedule;

const ILL_CONDITIONED: f64 = 1e12;

/// A linear solve that carries its conditioning.
#[derive(Debug, Clone)]
pub struct Solved {
    pub theta: Vector,
    pub condition: f64,
    pub warning: Option<String>,
}

fn solved(system: &Matrix, rhs: &Vector, what: &str) -> Result<Solved> {
    let theta = linalg::solve(system, rhs, what)?;
    let condition = linalg::condition_number(system);
    let warning =
        (condition > ILL_CONDITIONED).then(|| format!("{what} is ill-conditioned (condition number {condition:.3e})"));
    Ok(Solved {
        theta,
        condition,
        warning,
    })
}

fn check_lambda(gamma: f64, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid("lambda", format!("{lambda} is outside [0, 1]")));
    }
    if gamma * lambda >= 1.0 {
        return Err(Error::invalid(
            "lambda",
            format!("γλ = {} must be below 1", gamma * lambda),
        ));
    }
    Ok(())
}

/// `Σ_I = ΦᵀD(I − γP)Φ`.
pub fn sigma_i(phi: &Matrix, d: &Matrix, p: &Matrix, gamma: f64) -> Matrix {
    let next = p * phi;
    phi.transpose() * d * (phi - next * gamma)
}

/// `(I − γλP)⁻¹ Φ`, skipping the solve when `λ = 0`.
fn resolvent_times(p: &Matrix, gamma_lambda: f64, rhs: &Matrix) -> Result<Matrix> {
    if gamma_lambda == 0.0 {
        return Ok(rhs.clone());
    }
    let n = p.nrows();
    let system = Matrix::identity(n, n) - p * gamma_lambda;
    linalg::solve_matrix(&system, rhs, "I − γλP")
}

/// `Σ_I^(λ) = ΦᵀDΦ − γ(1−λ) ΦᵀD P (I − γλP)⁻¹ Φ`, the resummed form of
/// `ΦᵀDΦ − (1−λ) Σ_k λ^k γ^{k+1} ΦᵀD P^{k+1} Φ`.
pub fn sigma_i_lambda(phi: &Matrix, d: &Matrix, p: &Matrix, gamma: f64, lambda: f64) -> Result<Matrix> {
    check_lambda(gamma, lambda)?;
    let resolved = resolvent_times(p, gamma * lambda, phi)?;
    let next = p * resolved;
    Ok(phi.transpose() * d * (phi - next * (gamma * (1.0 - lambda))))
}

/// Solves `Σ_I θ* = ΦᵀD r`.
pub fn stationary_point_td0(phi: &Matrix, d: &Matrix, p: &Matrix, r: &Vector, gamma: f64) -> Result<Solved> {
    let system = sigma_i(phi, d, p, gamma);
    let rhs = phi.transpose() * d * r;
    solved(&system, &rhs, "Σ_I")
}

/// Solves `Σ_I^(λ) θ* = ΦᵀD (I − γλP)⁻¹ r`.
pub fn stationary_point_tdlambda(
    phi: &Matrix,
    d: &Matrix,
    p: &Matrix,
    r: &Vector,
    gamma: f64,
    lambda: f64,
) -> Result<Solved> {
    let system = sigma_i_lambda(phi, d, p, gamma, lambda)?;
    let returns = resolvent_times(p, gamma * lambda, &Matrix::from_column_slice(r.len(), 1, r.as_slice()))?;
    let rhs = phi.transpose() * d * returns.column(0);
    solved(&system, &rhs, "Σ_I^(λ)")
}

/// Default series truncation `⌈log(1e-12)/log(γλ)⌉`, capped at 10⁴.
pub fn default_truncation(gamma_lambda: f64) -> usize {
    if gamma_lambda <= 0.0 {
        return 1;
    }
    let k = (1e-12_f64.ln() / gamma_lambda.ln()).ceil();
    (k.max(1.0) as usize).min(10_000)
}

/// Output of [`t_lambda_apply`].
#[derive(Debug, Clone)]
pub struct TLambda {
    pub value: Vector,
    /// Upper bound on `‖value − T^(λ)V‖_∞`.
    pub tail_bound: f64,
}

/// `T^(λ)V = (1−λ) Σ_k λ^k (Σ_{t≤k} γ^t P^t r + γ^{k+1} P^{k+1} V)` truncated
/// after `k = K`; the leftover weight `λ^{K+1}` is put on the `K`-step
/// return so the weights still sum to one.
pub fn t_lambda_apply(v: &Vector, chain: &MarkovRewardProcess, lambda: f64, truncation: usize) -> Result<TLambda> {
    let gamma = chain.gamma();
    check_lambda(gamma, lambda)?;
    if truncation < 1 {
        return Err(Error::invalid("truncation", "K must be at least 1"));
    }
    if v.len() != chain.num_states() {
        return Err(Error::Dimension {
            axis: "value states",
            expected: chain.num_states(),
            found: v.len(),
        });
    }
    let p = chain.bootstrap_kernel();
    let mut reward_term = chain.expected_reward().clone();
    let mut partial = reward_term.clone();
    let mut value_term = (p * v) * gamma;
    let mut out = Vector::zeros(v.len());
    let mut weight = 1.0 - lambda;
    for k in 0..=truncation {
        if k > 0 {
            reward_term = (p * &reward_term) * gamma;
            partial += &reward_term;
            value_term = (p * &value_term) * gamma;
        }
        out += (&partial + &value_term) * weight;
        if k < truncation {
            weight *= lambda;
        }
    }
    // weight is now (1-λ)λ^K; the tail mass is λ^{K+1}
    let tail_mass = lambda.powi(truncation as i32 + 1);
    out += (&partial + &value_term) * tail_mass;
    let tail_bound = if lambda == 0.0 {
        0.0
    } else {
        (gamma * lambda).powi(truncation as i32 + 1) * (chain.r_max() / (1.0 - gamma) + 2.0 * linalg::inf_norm(v))
    };
    Ok(TLambda { value: out, tail_bound })
}

/// Slack of each bound; every entry is `bound − quantity` and should be
/// non-negative.
#[derive(Debug, Clone, Copy)]
pub struct LemmaChecks {
    /// `ω_I − (1−γ)ω`
    pub eigen_td0: f64,
    /// `2 − ‖Σ_I‖₂`
    pub norm_td0: f64,
    /// `r_max/ω_I − ‖θ*‖`
    pub radius_td0: f64,
    /// `ω_I^(λ) − (1−κ)ω`
    pub eigen_lambda: f64,
    /// `2 − ‖Σ_I^(λ)‖₂`
    pub norm_lambda: f64,
    /// `r_max/(ω_I^(λ)(1−γ)) − ‖θ*^(λ)‖`
    pub radius_lambda: f64,
}

impl LemmaChecks {
    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("eigen_td0", self.eigen_td0),
            ("norm_td0", self.norm_td0),
            ("radius_td0", self.radius_td0),
            ("eigen_lambda", self.eigen_lambda),
            ("norm_lambda", self.norm_lambda),
            ("radius_lambda", self.radius_lambda),
        ]
    }

    pub fn min_slack(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(f64::INFINITY, f64::min)
    }
}

/// Everything the model determines exactly for one chain, feature map and λ.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    chain: MarkovRewardProcess,
    features: FeatureMap,
    lambda: f64,
    mu: Vector,
    weighting: Matrix,
    omega: f64,
    sigma: Matrix,
    omega_i: f64,
    theta: Solved,
    sigma_lambda: Matrix,
    omega_i_lambda: f64,
    theta_lambda: Solved,
    kappa: f64,
    value: Option<Vector>,
    lambda_update_sign: f64,
}

impl GroundTruth {
    pub fn build(chain: &MarkovRewardProcess, features: &FeatureMap, lambda: f64) -> Result<Self> {
        if features.num_states() != chain.num_states() {
            return Err(Error::Dimension {
                axis: "feature rows",
                expected: chain.num_states(),
                found: features.num_states(),
            });
        }
        let gamma = chain.gamma();
        check_lambda(gamma, lambda)?;
        let stationary = chain::stationary_distribution(chain)?;
        let mu = stationary.mu().clone();
        let d = stationary.weighting();
        let phi = features.matrix();
        let p = chain.bootstrap_kernel();
        let r = chain.expected_reward();

        let gram = phi.transpose() * &d * phi;
        let omega = linalg::min_sym_eigenvalue(&gram);
        if !(omega > 0.0) {
            return Err(Error::invalid(
                "features",
                format!("ΦᵀDΦ is not positive definite (ω = {omega:e})"),
            ));
        }
        let sigma = sigma_i(phi, &d, p, gamma);
        let omega_i = linalg::min_sym_eigenvalue(&sigma);
        let theta = stationary_point_td0(phi, &d, p, r, gamma)?;
        let sigma_lambda = sigma_i_lambda(phi, &d, p, gamma, lambda)?;
        let omega_i_lambda = linalg::min_sym_eigenvalue(&sigma_lambda);
        let theta_lambda = stationary_point_tdlambda(phi, &d, p, r, gamma, lambda)?;
        let kappa = gamma * (1.0 - lambda) / (1.0 - gamma * lambda);
        let value = chain::value_function_exact(chain).ok();

        let mut gt = GroundTruth {
            chain: chain.clone(),
            features: features.clone(),
            lambda,
            mu,
            weighting: d,
            omega,
            sigma,
            omega_i,
            theta,
            sigma_lambda,
            omega_i_lambda,
            theta_lambda,
            kappa,
            value,
            lambda_update_sign: -1.0,
        };
        let probe = gt.theta_lambda.theta.add_scalar(1.0);
        gt.lambda_update_sign = gt.measure_lambda_update_sign(&probe)?;
        Ok(gt)
    }

    pub fn chain(&self) -> &MarkovRewardProcess {
        &self.chain
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.chain.gamma()
    }

    pub fn r_max(&self) -> f64 {
        self.chain.r_max()
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn weighting(&self) -> &Matrix {
        &self.weighting
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn sigma_i(&self) -> &Matrix {
        &self.sigma
    }

    pub fn omega_i(&self) -> f64 {
        self.omega_i
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta.theta
    }

    pub fn td0_solve(&self) -> &Solved {
        &self.theta
    }

    pub fn sigma_i_lambda(&self) -> &Matrix {
        &self.sigma_lambda
    }

    pub fn omega_i_lambda(&self) -> f64 {
        self.omega_i_lambda
    }

    pub fn theta_star_lambda(&self) -> &Vector {
        &self.theta_lambda.theta
    }

    pub fn tdlambda_solve(&self) -> &Solved {
        &self.theta_lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `V*` when `(I − γB)` is invertible.
    pub fn value(&self) -> Option<&Vector> {
        self.value.as_ref()
    }

    /// `R = r_max / ω_I`.
    pub fn radius(&self) -> f64 {
        self.r_max() / self.omega_i
    }

    /// `R^(λ) = r_max / (ω_I^(λ)(1−γ))`.
    pub fn radius_lambda(&self) -> f64 {
        self.r_max() / (self.omega_i_lambda * (1.0 - self.gamma()))
    }

    /// Sign `s` with `x̄(θ) = s · Σ_I^(λ)(θ − θ*)`, measured at build time.
    pub fn lambda_update_sign(&self) -> f64 {
        self.lambda_update_sign
    }

    fn measure_lambda_update_sign(&self, theta: &Vector) -> Result<f64> {
        let xbar = self.expected_update_tdlambda(theta, None)?;
        let linear = &self.sigma_lambda * (theta - self.theta_star_lambda());
        let minus = (&xbar + &linear).norm();
        let plus = (&xbar - &linear).norm();
        Ok(if minus <= plus { -1.0 } else { 1.0 })
    }

    fn phi_theta(&self, theta: &Vector) -> Vector {
        self.features.matrix() * theta
    }

    /// `ḡ(θ) = ΦᵀD(r + (γP − I)Φθ)`.
    pub fn expected_update_td0(&self, theta: &Vector) -> Vector {
        let v = self.phi_theta(theta);
        let backup = self.chain.expected_reward() + (self.chain.bootstrap_kernel() * &v) * self.gamma() - v;
        self.features.matrix().transpose() * &self.weighting * backup
    }

    /// `x̄(θ) = ΦᵀD(T^(λ)(Φθ) − Φθ)`; `None` uses [`default_truncation`].
    pub fn expected_update_tdlambda(&self, theta: &Vector, truncation: Option<usize>) -> Result<Vector> {
        let k = truncation.unwrap_or_else(|| default_truncation(self.gamma() * self.lambda));
        let v = self.phi_theta(theta);
        let applied = t_lambda_apply(&v, &self.chain, self.lambda, k)?;
        Ok(self.features.matrix().transpose() * &self.weighting * (applied.value - v))
    }

    /// Per-state expected TD(0) update direction `Σ_{s'} P(s'|s) g_{s,s'}(θ)`
    /// as the scalar `r(s) + γ(PΦθ)(s) − φ(s)ᵀθ` multiplying `φ(s)`.
    fn per_state_td_error(&self, theta: &Vector) -> Vector {
        let v = self.phi_theta(theta);
        self.chain.expected_reward() + (self.chain.bootstrap_kernel() * &v) * self.gamma() - v
    }

    /// `ḡ'(θ) − ḡ(θ) = Σ_s (P_t(s|s₀) − μ(s)) Σ_{s'} P(s'|s) g_{s,s'}(θ)`.
    pub fn markov_noise_td0(&self, theta: &Vector, start: usize, t: usize) -> Result<Vector> {
        Ok(self
            .markov_noise_profile(theta, start, t)?
            .pop()
            .expect("profile has t+1 entries"))
    }

    /// Markov noise for every `t = 0..=t_max`.
    pub fn markov_noise_profile(&self, theta: &Vector, start: usize, t_max: usize) -> Result<Vec<Vector>> {
        let n = self.chain.num_states();
        if start >= n {
            return Err(Error::invalid("start state", format!("{start} >= {n} states")));
        }
        let errors = self.per_state_td_error(theta);
        let phi = self.features.matrix();
        let mut law = Vector::zeros(n);
        law[start] = 1.0;
        let mut out = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            if t > 0 {
                law = self.chain.kernel().tr_mul(&law);
            }
            let weights = (&law - &self.mu).component_mul(&errors);
            out.push(phi.transpose() * weights);
        }
        Ok(out)
    }

    pub fn lemma_checks(&self) -> LemmaChecks {
        let gamma = self.gamma();
        LemmaChecks {
            eigen_td0: self.omega_i - (1.0 - gamma) * self.omega,
            norm_td0: 2.0 - linalg::spectral_norm(&self.sigma),
            radius_td0: self.radius() - self.theta_star().norm(),
            eigen_lambda: self.omega_i_lambda - (1.0 - self.kappa) * self.omega,
            norm_lambda: 2.0 - linalg::spectral_norm(&self.sigma_lambda),
            radius_lambda: self.radius_lambda() - self.theta_star_lambda().norm(),
        }
    }

    /// `max_{s, s'} |δ_{s,s'}(θ)|` over transitions with positive probability.
    pub fn max_td_error(&self, theta: &Vector) -> f64 {
        let v = self.phi_theta(theta);
        let gamma = self.gamma();
        (0..self.chain.num_states())
            .flat_map(|s| {
                let v = &v;
                self.chain.outcomes(s).iter().map(move |o| {
                    let boot = if self.chain.terminates(o) { 0.0 } else { v[o.next] };
                    (o.reward + gamma * boot - v[s]).abs()
                })
            })
            .fold(0.0, f64::max)
    }
}

/// Output of [`recursion_bound`].
#[derive(Debug, Clone, Copy)]
pub struct RecursionBound {
    pub nu: f64,
    pub c: f64,
    /// Whether `1 − a/(c+t) ≥ 0` for every `t ≥ τ`, i.e. `c + τ ≥ a`; the
    /// induction behind the envelope uses this.
    pub nonnegative_steps: bool,
}

impl RecursionBound {
    /// `ν / (c + t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.nu / (self.c + t)
    }
}

/// For `x_{t+1} ≤ (1 − a/(c+t)) x_t + b²/(c+t)²` with `a > 1`, returns
/// `ν = max{b²/(a−1), (c+τ)x_τ}` so that `x_t ≤ ν/(c+t)`.
pub fn recursion_bound(a: f64, b_squared: f64, c: f64, tau: f64, x_tau: f64) -> Result<RecursionBound> {
    if !(a > 1.0) {
        return Err(Error::invalid("a", format!("{a} must exceed 1")));
    }
    if !(c + tau > 0.0) {
        return Err(Error::invalid("c + tau", format!("{} must be positive", c + tau)));
    }
    if !(x_tau >= 0.0) {
        return Err(Error::invalid("x_tau", format!("{x_tau} must be non-negative")));
    }
    if !(b_squared >= 0.0) {
        return Err(Error::invalid("b^2", format!("{b_squared} must be non-negative")));
    }
    Ok(RecursionBound {
        nu: (b_squared / (a - 1.0)).max((c + tau) * x_tau),
        c,
        nonnegative_steps: c + tau >= a,
    })
}

/// Thresholds and noise constants for the decaying-step results.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceConstants {
    pub tau_mix: u64,
    pub tau_mix_lambda: u64,
    pub t_th: u64,
    pub t_th_lambda: u64,
    pub t0: u64,
    pub t0_lambda: u64,
    /// `max ‖g_{s,s'}(θ*)‖`.
    pub sigma: f64,
    /// `max |δ_{s,s'}(θ*^(λ))| / (1 − γλ)`, which bounds `‖x(θ*^(λ), z)‖`.
    pub sigma_lambda: f64,
}

fn ceil_minus_one(x: f64) -> u64 {
    if !x.is_finite() {
        return u64::MAX;
    }
    (x.ceil() - 1.0).max(0.0) as u64
}

/// `max{τ_mix, ⌈18/((1−γ)²ω²)⌉ − 1}`.
pub fn td0_threshold(tau_mix: u64, omega: f64, gamma: f64) -> u64 {
    tau_mix.max(ceil_minus_one(18.0 / ((1.0 - gamma).powi(2) * omega * omega)))
}

/// `max{τ_mix^(λ), ⌈28/((1−κ)²ω²(1−γλ))⌉ − 1}`.
pub fn tdlambda_threshold(tau_mix_lambda: u64, omega: f64, kappa: f64, gamma_lambda: f64) -> u64 {
    tau_mix_lambda.max(ceil_minus_one(
        28.0 / ((1.0 - kappa).powi(2) * omega * omega * (1.0 - gamma_lambda)),
    ))
}

/// `max{τ_mix, ⌈8/(ω ω_I (1−γ))⌉ − 1, t_th}`.
pub fn td0_averaging_threshold(tau_mix: u64, omega: f64, omega_i: f64, gamma: f64, t_th: u64) -> u64 {
    tau_mix
        .max(ceil_minus_one(8.0 / (omega * omega_i * (1.0 - gamma))))
        .max(t_th)
}

/// `max{2τ_mix^(λ), ⌈8/(ω ω_I^(λ) (1−κ))⌉ − 1, t_th^(λ)}`.
pub fn tdlambda_averaging_threshold(
    tau_mix_lambda: u64,
    omega: f64,
    omega_i_lambda: f64,
    kappa: f64,
    t_th_lambda: u64,
) -> u64 {
    tau_mix_lambda
        .saturating_mul(2)
        .max(ceil_minus_one(8.0 / (omega * omega_i_lambda * (1.0 - kappa))))
        .max(t_th_lambda)
}

const SETTLE_CAP: u64 = 100_000_000;

/// First `t` after which `envelope(t') ≤ alpha(t')` for all `t' ≥ t`, given
/// that `envelope/alpha` is non-increasing from `monotone_from` on.
pub(crate) fn settle_time(envelope: impl Fn(u64) -> f64, alpha: impl Fn(u64) -> f64, monotone_from: u64) -> u64 {
    let mut last_violation = None;
    let mut t = 0;
    loop {
        let below = envelope(t) <= alpha(t);
        if !below {
            last_violation = Some(t);
        } else if t >= monotone_from {
            break;
        }
        t += 1;
        if t > SETTLE_CAP {
            return u64::MAX;
        }
    }
    last_violation.map_or(0, |v| v + 1)
}

fn geometric_monotone_from(base: f64) -> u64 {
    // base^t (t+1) is non-increasing once t + 1 >= base / (1 - base)
    if base <= 0.0 {
        0
    } else {
        (base / (1.0 - base)).ceil() as u64
    }
}

/// `τ_mix` for a schedule: the settling time of `m ρ^t ≤ α_t`.
pub fn schedule_mixing_time(profile: &MixingProfile, schedule: &StepSchedule) -> u64 {
    let (m, rho) = (profile.m(), profile.rho());
    settle_time(
        |t| m * rho.powi(t as i32),
        |t| schedule.alpha(t),
        geometric_monotone_from(rho),
    )
}

/// `τ_mix^(λ)` for a schedule: the settling time of
/// `max{m ρ^t, (γλ)^t} ≤ α_t`.
pub fn schedule_mixing_time_lambda(profile: &MixingProfile, gamma_lambda: f64, schedule: &StepSchedule) -> u64 {
    let (m, rho) = (profile.m(), profile.rho());
    let envelope = |t: u64| {
        let trace = if gamma_lambda == 0.0 {
            0.0
        } else {
            gamma_lambda.powi(t as i32)
        };
        (m * rho.powi(t as i32)).max(trace)
    };
    settle_time(
        envelope,
        |t| schedule.alpha(t),
        geometric_monotone_from(rho).max(geometric_monotone_from(gamma_lambda)),
    )
}

/// Thresholds for the decaying schedules `2/(ω(t+1)(1−γ))` and
/// `2/(ω(t+1)(1−κ))`, with `ε = α_t` in the mixing times.
pub fn convergence_constants(gt: &GroundTruth, profile: &MixingProfile) -> ConvergenceConstants {
    let gamma = gt.gamma();
    let gamma_lambda = gamma * gt.lambda();
    let td0 = StepSchedule::td0_decay(gt.omega(), gamma);
    let tdl = StepSchedule::tdlambda_decay(gt.omega(), gt.kappa());
    let tau_mix = if gamma < 1.0 {
        schedule_mixing_time(profile, &td0)
    } else {
        u64::MAX
    };
    let tau_mix_lambda = if gt.kappa() < 1.0 {
        schedule_mixing_time_lambda(profile, gamma_lambda, &tdl)
    } else {
        u64::MAX
    };
    let t_th = td0_threshold(tau_mix, gt.omega(), gamma);
    let t_th_lambda = tdlambda_threshold(tau_mix_lambda, gt.omega(), gt.kappa(), gamma_lambda);
    let t0 = td0_averaging_threshold(tau_mix, gt.omega(), gt.omega_i(), gamma, t_th);
    let t0_lambda =
        tdlambda_averaging_threshold(tau_mix_lambda, gt.omega(), gt.omega_i_lambda(), gt.kappa(), t_th_lambda);
    let phi_norm = (0..gt.features().num_states())
        .map(|s| linalg::norm2(gt.features().row(s)))
        .fold(0.0, f64::max);
    ConvergenceConstants {
        tau_mix,
        tau_mix_lambda,
        t_th,
        t_th_lambda,
        t0,
        t0_lambda,
        sigma: sigma_td0(gt),
        sigma_lambda: gt.max_td_error(gt.theta_star_lambda()) * phi_norm / (1.0 - gamma_lambda),
    }
}

fn sigma_td0(gt: &GroundTruth) -> f64 {
    let theta = gt.theta_star();
    let v = gt.features().matrix() * theta;
    let chain = gt.chain();
    (0..chain.num_states())
        .flat_map(|s| {
            let v = &v;
            chain.outcomes(s).iter().map(move |o| {
                let boot = if chain.terminates(o) { 0.0 } else { v[o.next] };
                let delta = o.reward + gt.gamma() * boot - v[s];
                delta.abs() * linalg::norm2(gt.features().row(s))
            })
        })
        .fold(0.0, f64::max)
}
