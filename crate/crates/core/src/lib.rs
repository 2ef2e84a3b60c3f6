//! Temporal-difference policy evaluation with linear features, run by
//! independent agents whose parameters are averaged once at the end.
//!
//! The crate is organised bottom-up:
//!
//! * [`chain`]: MDPs, policy-induced chains, stationary laws and mixing.
//! * [`truth`]: exact stationary points, expected updates and bound constants.
//! * [`td`]: the TD(0) and TD(λ) learners.
//! * [`fleet`]: many independent learners plus averaging.
//! * [`experiments`] and [`output`]: claim checks and their CSV files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod error;
pub mod experiments;
pub mod features;
pub mod fleet;
pub mod instances;
pub mod linalg;
pub mod output;
pub mod rng;
pub mod td;
pub mod truth;

pub use chain::{MarkovRewardProcess, Mdp, MixingProfile, Policy, Regime};
pub use error::{Error, Result};
pub use features::FeatureMap;
pub use fleet::{FleetConfig, FleetResult, GossipMatrix};
pub use linalg::{Matrix, Vector};
pub use td::{RunSpec, StepSchedule, Variant};
pub use truth::GroundTruth;
