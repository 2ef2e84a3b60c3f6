//! Problem definitions read from TOML.
//!
//! ```toml
//! states = 3
//! actions = 2
//! gamma = 0.9
//! # transitions[s][a][s'], row-major
//! transitions = [[[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]], ...]
//! # rewards[s][s']
//! rewards = [[0.0, 1.0, 0.0], ...]
//! # optional: policy[s][a] (default uniform), features[s][k] (default
//! # one-hot), start_state, terminal_states, r_max, regime
//! ```
//!
//! Feature rows may be given for every state or only for the non-terminal
//! ones; rows of terminal states are dropped.

use std::path::Path;

use serde::Deserialize;

use crate::chain::{build_induced_chain, MarkovRewardProcess, Mdp, Policy, Regime};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default)]
    pub policy: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub start_state: Option<usize>,
    #[serde(default)]
    pub terminal_states: Vec<usize>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub regime: Option<String>,
}

fn dense(rows: &[Vec<f64>], nrows: usize, ncols: usize, field: &'static str) -> Result<Matrix> {
    if rows.len() != nrows {
        return Err(Error::Config(format!(
            "{field}: expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Config(format!(
            "{field}: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn mdp(&self) -> Result<Mdp> {
        let n = self.states;
        if self.transitions.len() != n {
            return Err(Error::Config(format!(
                "transitions: expected {n} states, found {}",
                self.transitions.len()
            )));
        }
        let mut per_action = vec![Matrix::zeros(n, n); self.actions];
        for (s, by_action) in self.transitions.iter().enumerate() {
            if by_action.len() != self.actions {
                return Err(Error::Config(format!(
                    "transitions[{s}]: expected {} actions, found {}",
                    self.actions,
                    by_action.len()
                )));
            }
            for (a, row) in by_action.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Config(format!(
                        "transitions[{s}][{a}]: expected {n} entries, found {}",
                        row.len()
                    )));
                }
                for (t, &p) in row.iter().enumerate() {
                    per_action[a][(s, t)] = p;
                }
            }
        }
        let rewards = dense(&self.rewards, n, n, "rewards")?;
        let mut mdp = Mdp::new(per_action, rewards, self.gamma)?;
        if !self.terminal_states.is_empty() || self.start_state.is_some() {
            let start = self
                .start_state
                .ok_or_else(|| Error::Config("start_state is required with terminal_states".into()))?;
            mdp = mdp.with_episodes(start, self.terminal_states.clone())?;
        }
        if let Some(r_max) = self.r_max {
            mdp = mdp.with_r_max(r_max)?;
        }
        Ok(mdp)
    }

    pub fn policy(&self) -> Result<Policy> {
        match &self.policy {
            None => Ok(Policy::uniform(self.states, self.actions)),
            Some(rows) => Policy::new(dense(rows, self.states, self.actions, "policy")?),
        }
    }

    pub fn chain(&self) -> Result<MarkovRewardProcess> {
        let chain = build_induced_chain(&self.mdp()?, &self.policy()?)?;
        match self.regime.as_deref() {
            None => Ok(chain),
            Some("episodic") if chain.regime() == Regime::Episodic => Ok(chain),
            Some("episodic") => Err(Error::Config("regime = \"episodic\" needs terminal_states".into())),
            Some("continuing") => Ok(chain.continuing()),
            Some(other) => Err(Error::Config(format!("regime: unknown value {other:?}"))),
        }
    }

    pub fn features(&self) -> Result<FeatureMap> {
        let live: Vec<usize> = (0..self.states).filter(|s| !self.terminal_states.contains(s)).collect();
        let Some(rows) = &self.features else {
            return Ok(FeatureMap::tabular(live.len()));
        };
        let dim = rows.first().map_or(0, Vec::len);
        let kept: Vec<Vec<f64>> = if rows.len() == self.states && rows.len() != live.len() {
            live.iter().map(|&s| rows[s].clone()).collect()
        } else {
            rows.clone()
        };
        FeatureMap::new(dense(&kept, live.len(), dim, "features")?)
    }
}
