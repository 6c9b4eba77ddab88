//! Contextual multi-armed-bandit placement of inference modules over a
//! simulated edge network, plus the distributed re-identification pipeline
//! those modules implement.
//!
//! Layout:
//! - [`mec_sim`]: topology, per-slot delay sampling and placement cost.
//! - [`context_model`]: data collection, delay levels and the bounded memory.
//! - [`policy_gen`]: per-context best-arm mining and softmax policy training.
//! - [`bandit_core`]: the EXP4-style online learner and the full driver.
//! - [`reid_pipeline`]: sharded galleries, identity decisions, attribute fusion
//!   and CMC/mAP evaluation.
//! - [`losses`]: joint identity/attribute loss functions with gradients.
//! - [`harness`]: experiment configuration, baselines and CSV output.

pub mod bandit_core;
pub mod context_model;
mod error;
pub mod harness;
pub mod losses;
pub mod mec_sim;
pub mod policy_gen;
pub mod reid_pipeline;
pub mod rng;

pub use error::{Error, Result};
