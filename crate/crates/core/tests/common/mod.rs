//! Independent reference computations used by the integration tests.
//!
//! Everything here is deliberately naive: explicit enumeration, truncated
//! series and repeated matrix products, sharing no code paths with the
//! library beyond the chain's public accessors.

#![allow(dead_code)]

use oneshot_td::chain::MarkovRewardProcess;
use oneshot_td::{FeatureMap, Matrix, Vector};

/// `Σ_s μ(s) Σ_{s'} P(s'|s) δ_{s,s'}(θ) φ(s)` by looping over outcomes.
pub fn expected_update_enumerated(chain: &MarkovRewardProcess, f: &FeatureMap, mu: &Vector, theta: &Vector) -> Vector {
    let d = f.dim();
    let mut out = Vector::zeros(d);
    for s in 0..chain.num_states() {
        let phi_s = f.row(s);
        let v_s: f64 = (0..d).map(|k| phi_s[k] * theta[k]).sum();
        for o in chain.outcomes(s) {
            let v_next: f64 = if chain.terminates(o) {
                0.0
            } else {
                (0..d).map(|k| f.row(o.next)[k] * theta[k]).sum()
            };
            let delta = o.reward + chain.gamma() * v_next - v_s;
            for k in 0..d {
                out[k] += mu[s] * o.prob * delta * phi_s[k];
            }
        }
    }
    out
}

fn power(p: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::identity(p.nrows(), p.ncols());
    for _ in 0..k {
        out = &out * p;
    }
    out
}

/// `ΦᵀDΦ − (1−λ) Σ_{k=0}^{K} λ^k γ^{k+1} ΦᵀD P^{k+1} Φ`.
pub fn sigma_lambda_series(phi: &Matrix, d: &Matrix, p: &Matrix, gamma: f64, lambda: f64, terms: usize) -> Matrix {
    let base = phi.transpose() * d;
    let mut out = &base * phi;
    let mut pk = p.clone();
    for k in 0..=terms {
        let w = (1.0 - lambda) * lambda.powi(k as i32) * gamma.powi(k as i32 + 1);
        out -= &base * &pk * phi * w;
        pk = &pk * p;
    }
    out
}

/// `ΦᵀD Σ_{k=0}^{K} (γλ)^k P^k r`.
pub fn lambda_rhs_series(phi: &Matrix, d: &Matrix, p: &Matrix, r: &Vector, gamma_lambda: f64, terms: usize) -> Vector {
    let mut acc = Vector::zeros(r.len());
    let mut term = r.clone();
    for k in 0..=terms {
        acc += &term * gamma_lambda.powi(k as i32);
        term = p * term;
    }
    phi.transpose() * d * acc
}

/// `T^(λ)V` truncated at `K`, by enumerating every trajectory of length
/// `K+1` from each state. The weight left after `K` goes on the `K`-step
/// return.
pub fn t_lambda_enumerated(v: &Vector, chain: &MarkovRewardProcess, lambda: f64, k_max: usize) -> Vector {
    let gamma = chain.gamma();
    let weights: Vec<f64> = (0..=k_max)
        .map(|k| {
            let w = (1.0 - lambda) * lambda.powi(k as i32);
            if k == k_max {
                w + lambda.powi(k_max as i32 + 1)
            } else {
                w
            }
        })
        .collect();
    let mut out = Vector::zeros(chain.num_states());
    for s in 0..chain.num_states() {
        // (state, probability, accumulated discounted reward, alive, depth)
        let mut stack = vec![(s, 1.0, 0.0, true, 0usize)];
        while let Some((state, prob, ret, alive, depth)) = stack.pop() {
            // `depth` rewards have been collected; the k-step return with
            // k = depth − 1 bootstraps from the current state.
            if depth > 0 {
                let k = depth - 1;
                let boot = if alive {
                    gamma.powi(depth as i32) * v[state]
                } else {
                    0.0
                };
                out[s] += weights[k] * prob * (ret + boot);
            }
            if depth == k_max + 1 {
                continue;
            }
            for o in chain.outcomes(state) {
                let reward = if alive {
                    gamma.powi(depth as i32) * o.reward
                } else {
                    0.0
                };
                let still = alive && !chain.terminates(o);
                stack.push((o.next, prob * o.prob, ret + reward, still, depth + 1));
            }
        }
    }
    out
}

/// `Σ_s (P^t(s|s₀) − μ(s)) φ(s) Σ_{s'} P(s'|s) δ_{s,s'}(θ)` with an explicit
/// matrix power.
pub fn markov_noise_direct(
    chain: &MarkovRewardProcess,
    f: &FeatureMap,
    mu: &Vector,
    theta: &Vector,
    start: usize,
    t: usize,
) -> Vector {
    let pt = power(chain.kernel(), t);
    let mut shifted = mu.clone();
    for s in 0..mu.len() {
        shifted[s] = pt[(start, s)] - mu[s];
    }
    expected_update_enumerated(chain, f, &shifted, theta)
}

/// `Σ_{k=0}^{t} (γλ)^k φ(s_{t−k})` over the part of the path after the last
/// terminal step.
pub fn trace_by_summation(f: &FeatureMap, states: &[usize], gamma_lambda: f64) -> Vec<f64> {
    let d = f.dim();
    let mut z = vec![0.0; d];
    for (k, &s) in states.iter().rev().enumerate() {
        for (zj, phi) in z.iter_mut().zip(f.row(s)) {
            *zj += gamma_lambda.powi(k as i32) * phi;
        }
    }
    z
}

/// Runs `x_{t+1} = (1 − a/(c+t)) x_t + b²/(c+t)²` from `t = τ` and returns
/// the largest `x_t − ν/(c+t)` seen up to `t_max`.
pub fn recursion_worst_excess(a: f64, b2: f64, c: f64, tau: u64, x_tau: f64, nu: f64, t_max: u64) -> f64 {
    let mut x = x_tau;
    let mut worst = x - nu / (c + tau as f64);
    for t in tau..t_max {
        let ct = c + t as f64;
        x = (1.0 - a / ct) * x + b2 / (ct * ct);
        worst = worst.max(x - nu / (ct + 1.0));
    }
    worst
}
