use super::learner::{Learner, LearnerConfig, RetroEval, RoundOutcome};
use crate::mec_sim::{end_to_end_cost, Arm, SlotObservation, Simulator};
use crate::{rng, Result};

/// Anything that places one module per slot.
pub trait PlacementAgent: Send {
    fn step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome>;

    /// Evaluations of earlier rounds that only became computable now.
    fn take_retro(&mut self) -> Vec<RetroEval> {
        Vec::new()
    }

    fn relearn(&mut self) -> Result<()> {
        Ok(())
    }

    fn learner(&self) -> Option<&Learner> {
        None
    }
}

impl PlacementAgent for Learner {
    fn step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        Learner::step(self, slot, obs, cost_of)
    }

    fn take_retro(&mut self) -> Vec<RetroEval> {
        Learner::take_retro(self)
    }

    fn relearn(&mut self) -> Result<()> {
        Learner::relearn(self)
    }

    fn learner(&self) -> Option<&Learner> {
        Some(self)
    }
}

/// Per-agent round outcomes plus the summed delay of every slot.
#[derive(Clone, Debug)]
pub struct ExperimentTrace {
    pub arms: Vec<Arm>,
    pub agents: Vec<Vec<RoundOutcome>>,
    /// Sum over agents of the raw cost, per slot (ms).
    pub slot_delay_ms: Vec<f64>,
}

impl ExperimentTrace {
    pub fn horizon(&self) -> usize {
        self.slot_delay_ms.len()
    }

    /// Mean slot delay over the last `fraction` of the horizon.
    pub fn tail_mean_delay(&self, fraction: f64) -> f64 {
        let n = self.slot_delay_ms.len();
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        let tail = &self.slot_delay_ms[n.saturating_sub(take)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Run `agents` for `horizon` slots on shared delay realizations.
///
/// Within a slot agents act in index order. Agent `k` observes server delays
/// that already include the load penalty of the modules agents `0..k` placed,
/// and pays that loaded cost.
pub fn run_agents(
    sim: &Simulator,
    agents: &mut [Box<dyn PlacementAgent>],
    horizon: usize,
    relearn_at: &[u64],
) -> Result<ExperimentTrace> {
    let arms = sim.arms().to_vec();
    let model = sim.model();
    let mut traces: Vec<Vec<RoundOutcome>> = agents.iter().map(|_| Vec::with_capacity(horizon)).collect();
    let mut slot_delay = Vec::with_capacity(horizon);
    for slot in 0..horizon as u64 {
        if relearn_at.contains(&slot) {
            for agent in agents.iter_mut() {
                agent.relearn()?;
            }
        }
        let obs = sim.sample_slot(slot);
        let mut load = vec![0u32; sim.topology().server_count()];
        let mut total = 0.0;
        for (agent, trace) in agents.iter_mut().zip(traces.iter_mut()) {
            let seen = obs.with_load(model, &load);
            let cost_of = |a: usize| end_to_end_cost(&obs, arms[a], &load, model).expect("arm from topology");
            let out = agent.step(slot, &seen, &cost_of)?;
            load[arms[out.arm].server.0] += 1;
            total += out.raw_cost;
            trace.push(out);
            for r in agent.take_retro() {
                if let Some(row) = trace.iter_mut().find(|o| o.slot == r.slot) {
                    row.context = Some(r.context);
                    row.norm_cost = Some(r.norm_cost);
                    row.oracle_cost = r.oracle_cost;
                    row.best_arm_cost = r.best_arm_cost;
                }
            }
        }
        slot_delay.push(total);
    }
    Ok(ExperimentTrace {
        arms,
        agents: traces,
        slot_delay_ms: slot_delay,
    })
}

/// Seed of agent `k` in an experiment seeded with `seed`.
pub fn agent_seed(seed: u64, agent: usize) -> u64 {
    rng::derive(seed, 0xA6E0 + agent as u64)
}

/// Collection, bound fitting, initial policies, then online learning, for
/// `modules` independent agents over `horizon` slots.
pub fn mod_dist_mab(sim: &Simulator, cfg: &LearnerConfig, modules: usize, horizon: usize, seed: u64) -> Result<(ExperimentTrace, Vec<Learner>)> {
    let entities = sim.topology().entity_count();
    let learners = (0..modules)
        .map(|k| Learner::new(cfg.clone(), sim.arms().len(), entities, agent_seed(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    let mut agents: Vec<Box<dyn PlacementAgent>> = learners.into_iter().map(|l| Box::new(l) as Box<dyn PlacementAgent>).collect();
    let trace = run_agents(sim, &mut agents, horizon, &[])?;
    let learners = agents
        .iter()
        .map(|a| a.learner().cloned().expect("learner agents"))
        .collect();
    Ok((trace, learners))
}
