use rayon::prelude::*;

use super::baselines::{FixedAgent, GreedyAgent};
use super::config::{Algorithm, ExperimentConfig};
use crate::bandit_core::{agent_seed, run_agents, trace_regret, ExperimentTrace, Learner, PlacementAgent};
use crate::mec_sim::Simulator;
use crate::Result;

/// Trace of one run plus the final state of any learners.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub trace: ExperimentTrace,
    pub learners: Vec<Learner>,
}

impl RunResult {
    /// Summed cumulative regret of all learner agents, if evaluated.
    pub fn total_regret(&self) -> Option<f64> {
        if self.learners.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for agent in &self.trace.agents {
            total += trace_regret(agent).ok()?.last().copied().unwrap_or(0.0);
        }
        Some(total)
    }
}

/// Scalar outcome of one (algorithm, seed) trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub mean_delay_ms: f64,
    /// Mean slot delay over the last quarter of the horizon.
    pub tail_delay_ms: f64,
    pub regret: Option<f64>,
}

impl From<&RunResult> for TrialSummary {
    fn from(r: &RunResult) -> Self {
        Self {
            algorithm: r.algorithm,
            seed: r.seed,
            mean_delay_ms: r.trace.tail_mean_delay(1.0),
            tail_delay_ms: r.trace.tail_mean_delay(0.25),
            regret: r.total_regret(),
        }
    }
}

fn agents_for(sim: &Simulator, cfg: &ExperimentConfig) -> Result<Vec<Box<dyn PlacementAgent>>> {
    let arms = sim.arms().len();
    let entities = sim.topology().entity_count();
    let mut agents: Vec<Box<dyn PlacementAgent>> = Vec::with_capacity(cfg.modules);
    for k in 0..cfg.modules {
        agents.push(match cfg.algorithm {
            Algorithm::Fixed => Box::new(FixedAgent::new(sim)),
            Algorithm::Greedy => Box::new(GreedyAgent::new(sim)),
            _ => Box::new(Learner::new(cfg.learner_config(arms)?, arms, entities, agent_seed(cfg.seed, k))?),
        });
    }
    Ok(agents)
}

/// Run `cfg.algorithm` on `sim`, reseeded with `cfg.seed`.
pub fn run_on(sim: &Simulator, cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let sim = sim.with_seed(cfg.seed);
    let mut agents = agents_for(&sim, cfg)?;
    let trace = run_agents(&sim, &mut agents, cfg.t, &cfg.relearn_at)?;
    let learners = agents.iter().filter_map(|a| a.learner().cloned()).collect();
    Ok(RunResult {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        trace,
        learners,
    })
}

/// Load the topology and delay model named in `cfg` and run it.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    run_on(&cfg.simulator()?, cfg)
}

fn with_algorithm(cfg: &ExperimentConfig, algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        ..cfg.clone()
    }
}

pub fn run_fixed(sim: &Simulator, cfg: &ExperimentConfig) -> Result<ExperimentTrace> {
    run_on(sim, &with_algorithm(cfg, Algorithm::Fixed)).map(|r| r.trace)
}

pub fn run_greedy(sim: &Simulator, cfg: &ExperimentConfig) -> Result<ExperimentTrace> {
    run_on(sim, &with_algorithm(cfg, Algorithm::Greedy)).map(|r| r.trace)
}

/// The full learner and both ablations on identical delay realizations.
pub fn run_ablations(sim: &Simulator, cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    [Algorithm::Moddistmab, Algorithm::NoPolicyUpdate, Algorithm::NoOnlineLearning]
        .par_iter()
        .map(|&a| run_on(sim, &with_algorithm(cfg, a)))
        .collect()
}

/// Every `(algorithm, seed)` pair in parallel; results ordered by seed, then
/// by the order of `algorithms`.
pub fn run_trials(sim: &Simulator, cfg: &ExperimentConfig, algorithms: &[Algorithm], seeds: &[u64]) -> Result<Vec<TrialSummary>> {
    let jobs: Vec<(u64, Algorithm)> = seeds
        .iter()
        .flat_map(|&s| algorithms.iter().map(move |&a| (s, a)))
        .collect();
    jobs.par_iter()
        .map(|&(seed, algorithm)| {
            let c = ExperimentConfig {
                algorithm,
                seed,
                ..cfg.clone()
            };
            run_on(sim, &c).map(|r| TrialSummary::from(&r))
        })
        .collect()
}
