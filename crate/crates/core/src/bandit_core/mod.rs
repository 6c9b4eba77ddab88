//! The EXP4-style online learner over generated policies, and the driver
//! that runs collection, policy generation and online learning end to end.

mod driver;
mod learner;
mod regret;
mod weights;

pub use driver::{agent_seed, mod_dist_mab, run_agents, ExperimentTrace, PlacementAgent};
pub use learner::{
    default_eps_update, default_gamma, Learner, LearnerConfig, LearnerMode, Phase, RetroEval, RoundOutcome,
};
pub use regret::{best_response_regret, fit_power_law, regret, trace_regret};
pub use weights::{arm_distribution, fake_costs, normalize_cost, policy_distribution, predictions, update_weights, WeightTable};
