//! Run settings: an optional TOML file, overridden field by field by flags.
//!
//! A config file holds a problem definition at the top level, a `[run]`
//! table, or both:
//!
//! ```toml
//! [run]
//! problem = "randomwalk"
//! seed = 2024
//! agents = [1, 2, 4, 8]
//! episodes = 100
//! lambda = 0.9
//! schedule = "const:0.001"
//! replications = 200
//! averaging = "consensus:ring:100"
//! every = 1
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use oneshot_td::fleet::{Averaging, Execution, GossipMatrix};
use oneshot_td::instances::builtin;
use oneshot_td::output::KeyValues;
use oneshot_td::td::{Cadence, Horizon, RunSpec, StepSchedule, Variant};
use oneshot_td::truth::GroundTruth;
use oneshot_td::{config::ProblemConfig, Error, FeatureMap, MarkovRewardProcess, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with a problem definition and/or a [run] table
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in problem: randomwalk, randomwalk-continuing, four-state
    #[arg(long, value_name = "NAME")]
    pub problem: Option<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Base seed for every random stream
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Number of agents; a comma-separated list for `speedup`
    #[arg(long, value_name = "N[,N...]", value_delimiter = ',')]
    pub agents: Option<Vec<usize>>,
    /// Step budget per agent
    #[arg(long, value_name = "T", conflicts_with = "episodes")]
    pub steps: Option<u64>,
    /// Episode budget per agent (episodic problems)
    #[arg(long, value_name = "E")]
    pub episodes: Option<u64>,
    /// Run TD(λ) with this λ instead of TD(0)
    #[arg(long, value_name = "F")]
    pub lambda: Option<f64>,
    /// Step sizes: `decay` or `const:ALPHA`
    #[arg(long, value_name = "SPEC")]
    pub schedule: Option<String>,
    /// Independent replications
    #[arg(long, value_name = "K")]
    pub replications: Option<usize>,
    /// Final averaging: `oneshot` or `consensus:TOPOLOGY:ROUNDS`
    #[arg(long, value_name = "SPEC")]
    pub averaging: Option<String>,
    /// Record a curve point every K steps or episodes
    #[arg(long, value_name = "K")]
    pub every: Option<u64>,
    /// Cap on worker threads; results do not depend on it
    #[arg(long, value_name = "W")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunTable {
    problem: Option<String>,
    seed: Option<u64>,
    agents: Option<OneOrMany>,
    steps: Option<u64>,
    episodes: Option<u64>,
    lambda: Option<f64>,
    schedule: Option<String>,
    replications: Option<usize>,
    averaging: Option<String>,
    every: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl From<OneOrMany> for Vec<usize> {
    fn from(v: OneOrMany) -> Self {
        match v {
            OneOrMany::One(n) => vec![n],
            OneOrMany::Many(ns) => ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    Decay,
    Const(f64),
}

impl ScheduleSpec {
    fn parse(text: &str) -> Result<Self> {
        if text == "decay" {
            return Ok(ScheduleSpec::Decay);
        }
        let alpha = text
            .strip_prefix("const:")
            .and_then(|a| a.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("schedule: expected `decay` or `const:ALPHA`, got {text:?}")))?;
        Ok(ScheduleSpec::Const(alpha))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AveragingSpec {
    OneShot,
    Consensus { topology: String, rounds: usize },
}

impl AveragingSpec {
    fn parse(text: &str) -> Result<Self> {
        if text == "oneshot" {
            return Ok(AveragingSpec::OneShot);
        }
        let bad = || {
            Error::Config(format!(
                "averaging: expected `oneshot` or `consensus:TOPOLOGY:ROUNDS`, got {text:?}"
            ))
        };
        let body = text.strip_prefix("consensus:").ok_or_else(bad)?;
        let (topology, rounds) = body.rsplit_once(':').ok_or_else(bad)?;
        let rounds = rounds.parse().map_err(|_| bad())?;
        Ok(AveragingSpec::Consensus {
            topology: topology.to_string(),
            rounds,
        })
    }

    pub fn build(&self, agents: usize) -> Result<Averaging> {
        Ok(match self {
            AveragingSpec::OneShot => Averaging::OneShot,
            AveragingSpec::Consensus { topology, rounds } => Averaging::Consensus {
                matrix: GossipMatrix::from_topology(topology, agents)?,
                rounds: *rounds,
            },
        })
    }
}

/// Per-command defaults that differ between subcommands.
pub struct Defaults {
    pub agents: Vec<usize>,
    pub steps: u64,
    pub schedule: ScheduleSpec,
    pub replications: usize,
}

pub struct Settings {
    pub problem: String,
    pub chain: MarkovRewardProcess,
    pub features: FeatureMap,
    pub out: PathBuf,
    pub seed: u64,
    pub agents: Vec<usize>,
    pub horizon: Horizon,
    pub lambda: Option<f64>,
    pub schedule: ScheduleSpec,
    pub replications: usize,
    pub averaging: AveragingSpec,
    pub every: Option<u64>,
    pub execution: Execution,
}

fn load_file(path: &Path) -> Result<(Option<ProblemConfig>, RunTable)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let run = match table.remove("run") {
        None => RunTable::default(),
        Some(v) => v
            .try_into()
            .map_err(|e| Error::Config(format!("{} [run]: {e}", path.display())))?,
    };
    let problem = if table.is_empty() {
        None
    } else {
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        Some(ProblemConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?)
    };
    Ok((problem, run))
}

impl Settings {
    pub fn resolve(flags: &Flags, defaults: Defaults) -> Result<Self> {
        let (file_problem, run) = match &flags.config {
            Some(path) => load_file(path)?,
            None => (None, RunTable::default()),
        };
        let named = flags.problem.clone().or(run.problem.clone());
        let (problem, chain, features) = match (named, file_problem, &flags.config) {
            (Some(name), _, _) => {
                let (chain, features) = builtin(&name)?;
                (name, chain, features)
            }
            (None, Some(cfg), Some(path)) => (path.display().to_string(), cfg.chain()?, cfg.features()?),
            _ => {
                let (chain, features) = builtin("randomwalk")?;
                ("randomwalk".to_string(), chain, features)
            }
        };

        let horizon = match (flags.steps, flags.episodes, run.steps, run.episodes) {
            (Some(t), _, _, _) => Horizon::Steps(t),
            (None, Some(e), _, _) => Horizon::Episodes(e),
            (None, None, Some(_), Some(_)) => {
                return Err(Error::Config("[run]: set either steps or episodes, not both".into()))
            }
            (None, None, Some(t), None) => Horizon::Steps(t),
            (None, None, None, Some(e)) => Horizon::Episodes(e),
            (None, None, None, None) => Horizon::Steps(defaults.steps),
        };
        let schedule = match flags.schedule.as_ref().or(run.schedule.as_ref()) {
            Some(text) => ScheduleSpec::parse(text)?,
            None => defaults.schedule,
        };
        let averaging = match flags.averaging.as_ref().or(run.averaging.as_ref()) {
            Some(text) => AveragingSpec::parse(text)?,
            None => AveragingSpec::OneShot,
        };
        let execution = match flags.workers.or(run.workers) {
            None => Execution::Parallel,
            Some(0) => return Err(Error::Config("workers: must be at least 1".into())),
            Some(w) => Execution::ParallelCapped(w),
        };
        let agents: Vec<usize> = flags
            .agents
            .clone()
            .or(run.agents.map(Vec::from))
            .unwrap_or(defaults.agents);
        if agents.is_empty() || agents.contains(&0) {
            return Err(Error::Config(format!(
                "agents: every entry must be at least 1, got {agents:?}"
            )));
        }
        let replications = flags.replications.or(run.replications).unwrap_or(defaults.replications);
        if replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        let lambda = flags.lambda.or(run.lambda);
        if let Some(l) = lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("lambda: {l} is outside [0, 1]")));
            }
        }
        let every = flags.every.or(run.every);
        if every == Some(0) {
            return Err(Error::Config("every: must be at least 1".into()));
        }
        Ok(Settings {
            problem,
            chain,
            features,
            out: flags.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(run.seed).unwrap_or(0),
            agents,
            horizon,
            lambda,
            schedule,
            replications,
            averaging,
            every,
            execution,
        })
    }

    pub fn variant(&self) -> Variant {
        match self.lambda {
            None => Variant::Td0,
            Some(l) => Variant::TdLambda(l),
        }
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        GroundTruth::build(&self.chain, &self.features, self.lambda.unwrap_or(0.0))
    }

    pub fn step_schedule(&self, gt: &GroundTruth) -> StepSchedule {
        match (self.schedule, self.lambda) {
            (ScheduleSpec::Const(a), _) => StepSchedule::constant(a),
            (ScheduleSpec::Decay, None) => StepSchedule::td0_decay(gt.omega(), gt.gamma()),
            (ScheduleSpec::Decay, Some(_)) => StepSchedule::tdlambda_decay(gt.omega(), gt.kappa()),
        }
    }

    fn horizon_len(&self) -> u64 {
        match self.horizon {
            Horizon::Steps(t) | Horizon::Episodes(t) => t,
        }
    }

    /// Cadence from `every`, or about 100 points over the horizon.
    pub fn cadence(&self) -> Cadence {
        let k = self.every.unwrap_or((self.horizon_len() / 100).max(1));
        match self.horizon {
            Horizon::Steps(_) => Cadence::Steps(k),
            Horizon::Episodes(_) => Cadence::Episodes(k),
        }
    }

    pub fn run_spec(&self, gt: &GroundTruth) -> RunSpec {
        RunSpec::new(self.variant(), self.step_schedule(gt), self.horizon).with_cadence(self.cadence())
    }

    /// Everything that determines the output, for the header of each file.
    pub fn describe(&self, command: &str) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("command", command)
            .push("problem", &self.problem)
            .push("seed", self.seed)
            .push(
                "agents",
                self.agents.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            );
        match self.horizon {
            Horizon::Steps(t) => kv.push("steps", t),
            Horizon::Episodes(e) => kv.push("episodes", e),
        };
        kv.push("variant", self.variant().label())
            .push(
                "schedule",
                match self.schedule {
                    ScheduleSpec::Decay => "decay".to_string(),
                    ScheduleSpec::Const(a) => format!("const:{a}"),
                },
            )
            .push("replications", self.replications)
            .push(
                "averaging",
                match &self.averaging {
                    AveragingSpec::OneShot => "oneshot".to_string(),
                    AveragingSpec::Consensus { topology, rounds } => format!("consensus:{topology}:{rounds}"),
                },
            );
        match self.cadence() {
            Cadence::Steps(k) | Cadence::Episodes(k) => kv.push("every", k),
            Cadence::Final => kv.push("every", "final"),
        };
        kv
    }
}
