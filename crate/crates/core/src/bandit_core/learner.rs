use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::weights::{
    arm_distribution_from, fake_costs, normalize_cost, policy_distribution, predictions, sample_index,
    update_weights_from, WeightTable,
};
use crate::context_model::{discretize, discretize_flat, fit_bounds, Context, DataPoint, LevelBounds, Memory};
use crate::mec_sim::SlotObservation;
use crate::policy_gen::{default_strategies, generate_policies, Policy, PolicyId, PolicyStrategy};
use crate::{rng, Error, Result};

/// Which variant of the online learner runs after data collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    /// Weighted policy set with exploration and periodic refresh.
    ModDistMab,
    /// As above, but the initial policy set is never replaced.
    NoPolicyUpdate,
    /// One policy, retrained every refresh interval and always followed.
    NoOnlineLearning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    /// N: uniform-exploration rounds before policies exist.
    pub collection_rounds: usize,
    /// L: delay levels per entity.
    pub levels: u16,
    /// I: policy refresh interval, in online rounds.
    pub refresh_interval: usize,
    pub gamma: f64,
    pub eps_update: f64,
    /// One strategy per policy; its length is P.
    pub strategies: Vec<PolicyStrategy>,
    pub memory_capacity: usize,
    pub mode: LearnerMode,
    /// Record counterfactual costs of every arm (simulator only).
    pub evaluate: bool,
}

/// `min(0.05, 1/sqrt(T))`, nudged just below `1/sqrt(T)`.
pub fn default_gamma(horizon: usize) -> f64 {
    0.05f64.min(0.999 / (horizon.max(1) as f64).sqrt())
}

/// `sqrt(ln|P| / (3 T |A|))` clamped into `(0, 1/2)`.
pub fn default_eps_update(policies: usize, horizon: usize, arms: usize) -> f64 {
    let raw = ((policies.max(1) as f64).ln() / (3.0 * horizon.max(1) as f64 * arms.max(1) as f64)).sqrt();
    raw.clamp(1e-6, 0.5 - 1e-9)
}

impl LearnerConfig {
    /// Defaults for everything not named: gamma and eps from the horizon,
    /// strategies from [`default_strategies`], memory of 10^5 entries.
    pub fn new(collection_rounds: usize, levels: u16, policies: usize, refresh_interval: usize, horizon: usize, arms: usize) -> Self {
        Self {
            collection_rounds,
            levels,
            refresh_interval,
            gamma: default_gamma(horizon),
            eps_update: default_eps_update(policies, horizon, arms),
            strategies: default_strategies(policies),
            memory_capacity: crate::context_model::DEFAULT_MEMORY_CAPACITY,
            mode: LearnerMode::ModDistMab,
            evaluate: false,
        }
    }

    pub fn policy_count(&self) -> usize {
        self.strategies.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.collection_rounds == 0 {
            return Err(Error::config("N must be at least 1"));
        }
        if self.collection_rounds > self.memory_capacity {
            return Err(Error::config("N exceeds memory capacity"));
        }
        if self.levels == 0 {
            return Err(Error::config("L must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("P must be at least 1"));
        }
        if self.refresh_interval == 0 {
            return Err(Error::config("I must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if !(self.eps_update > 0.0 && self.eps_update < 0.5) {
            return Err(Error::config("eps_update must lie in (0, 1/2)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collection,
    Online,
}

/// Everything that happened in one round for one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub slot: u64,
    pub phase: Phase,
    pub context: Option<Context>,
    pub arm: usize,
    pub raw_cost: f64,
    pub norm_cost: Option<f64>,
    /// Uniform pick rather than a policy pick.
    pub explored: bool,
    pub policy_id: Option<PolicyId>,
    /// Arm distribution of the policy mixture on online rounds, empty during collection.
    pub q: Vec<f64>,
    pub p_sum: Option<f64>,
    /// `min over the policy set of c_t(pi(x_t))`, normalized (evaluation mode).
    pub oracle_cost: Option<f64>,
    /// `min over arms of c_t(a)`, normalized (evaluation mode).
    pub best_arm_cost: Option<f64>,
}

impl RoundOutcome {
    pub(crate) fn simple(slot: u64, arm: usize, raw_cost: f64) -> Self {
        Self {
            slot,
            phase: Phase::Online,
            context: None,
            arm,
            raw_cost,
            norm_cost: None,
            explored: false,
            policy_id: None,
            q: Vec::new(),
            p_sum: None,
            oracle_cost: None,
            best_arm_cost: None,
        }
    }
}

/// Late evaluation of a collection round, available once policies exist.
#[derive(Clone, Debug, PartialEq)]
pub struct RetroEval {
    pub slot: u64,
    pub context: Context,
    pub norm_cost: f64,
    pub oracle_cost: Option<f64>,
    pub best_arm_cost: Option<f64>,
}

#[derive(Clone, Debug)]
struct CollectedRound {
    slot: u64,
    delays: Vec<f64>,
    raw_cost: f64,
    all_costs: Vec<f64>,
}

/// State of one placement agent: memory, level bounds, policy set and weights.
#[derive(Clone, Debug)]
pub struct Learner {
    cfg: LearnerConfig,
    arm_count: usize,
    memory: Memory,
    bounds: Option<LevelBounds>,
    policies: Vec<Policy>,
    weights: WeightTable,
    next_id: PolicyId,
    rounds: usize,
    online_rounds: usize,
    generation: u64,
    seed: u64,
    rng: ChaCha8Rng,
    collected: Vec<CollectedRound>,
    retro: Vec<RetroEval>,
}

impl Learner {
    pub fn new(cfg: LearnerConfig, arm_count: usize, entities: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if arm_count == 0 {
            return Err(Error::config("arm set is empty"));
        }
        let memory = Memory::new(cfg.memory_capacity, entities)?;
        let weights = WeightTable::new([], cfg.gamma, cfg.eps_update)?;
        Ok(Self {
            cfg,
            arm_count,
            memory,
            bounds: None,
            policies: Vec::new(),
            weights,
            next_id: 0,
            rounds: 0,
            online_rounds: 0,
            generation: 0,
            seed,
            rng: rng::stream(seed, 0x1EA5),
            collected: Vec::new(),
            retro: Vec::new(),
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn bounds(&self) -> Option<&LevelBounds> {
        self.bounds.as_ref()
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn online_rounds(&self) -> usize {
        self.online_rounds
    }

    /// Collection-round evaluations computed since the last call.
    pub fn take_retro(&mut self) -> Vec<RetroEval> {
        std::mem::take(&mut self.retro)
    }

    /// Current arm distribution at `x` (one-hot for the single-policy mode).
    pub fn arm_distribution_at(&self, x: &Context) -> Result<Vec<f64>> {
        if self.policies.is_empty() {
            return Err(Error::invalid("no policies yet; collection phase still running"));
        }
        let preds = predictions(&self.policies, x)?;
        if self.cfg.mode == LearnerMode::NoOnlineLearning {
            let mut q = vec![0.0; self.arm_count];
            q[preds[&self.policies[0].id()]] = 1.0;
            return Ok(q);
        }
        arm_distribution_from(&policy_distribution(&self.weights)?, &preds, self.arm_count)
    }

    /// Arm with the largest `q(a)` at `x`, ties to the lowest index.
    pub fn most_probable_arm(&self, x: &Context) -> Result<usize> {
        let q = self.arm_distribution_at(x)?;
        let mut best = 0;
        for (a, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = a;
            }
        }
        Ok(best)
    }

    /// Play one round. `cost_of(a)` is the raw cost of arm `a` this slot;
    /// it is called for the played arm only unless evaluation is enabled.
    pub fn step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        if self.rounds < self.cfg.collection_rounds {
            self.collection_step(slot, obs, cost_of)
        } else {
            self.online_step(slot, obs, cost_of)
        }
    }

    fn collection_step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        let arm = self.rng.random_range(0..self.arm_count);
        let raw = cost_of(arm);
        let delays = obs.to_vec();
        self.memory.push(DataPoint {
            slot,
            delays: delays.clone(),
            arm,
            cost: raw,
        })?;
        if self.cfg.evaluate {
            self.collected.push(CollectedRound {
                slot,
                delays,
                raw_cost: raw,
                all_costs: (0..self.arm_count).map(cost_of).collect(),
            });
        }
        self.rounds += 1;
        if self.rounds == self.cfg.collection_rounds {
            self.initialize()?;
        }
        Ok(RoundOutcome {
            phase: Phase::Collection,
            explored: true,
            ..RoundOutcome::simple(slot, arm, raw)
        })
    }

    fn generate(&mut self, strategies: &[PolicyStrategy]) -> Result<Vec<Policy>> {
        let bounds = self.bounds.as_ref().expect("bounds fitted before policy generation");
        let seed = rng::derive(self.seed, 0x6E00 + self.generation);
        self.generation += 1;
        let out = generate_policies(&self.memory, bounds, self.arm_count, strategies, seed, self.next_id)?;
        self.next_id += strategies.len() as u64;
        Ok(out)
    }

    fn active_strategies(&self) -> Vec<PolicyStrategy> {
        match self.cfg.mode {
            LearnerMode::NoOnlineLearning => self.cfg.strategies[..1].to_vec(),
            _ => self.cfg.strategies.clone(),
        }
    }

    /// Fit level bounds on everything collected, convert the collected data
    /// to contexts and generate the initial policy set.
    fn initialize(&mut self) -> Result<()> {
        self.bounds = Some(fit_bounds(&self.memory, self.cfg.levels)?);
        let strategies = self.active_strategies();
        self.policies = self.generate(&strategies)?;
        self.weights = WeightTable::new(self.policies.iter().map(Policy::id), self.cfg.gamma, self.cfg.eps_update)?;

        let bounds = self.bounds.clone().unwrap();
        let (c_min, c_max) = self.memory.cost_range().expect("memory is non-empty");
        for round in std::mem::take(&mut self.collected) {
            let context = discretize_flat(&round.delays, &bounds)?;
            let preds = predictions(&self.policies, &context)?;
            let norm = |c: f64| normalize_cost(c, c_min, c_max);
            self.retro.push(RetroEval {
                slot: round.slot,
                norm_cost: norm(round.raw_cost),
                oracle_cost: preds.values().map(|&a| norm(round.all_costs[a])).reduce(f64::min),
                best_arm_cost: round.all_costs.iter().map(|&c| norm(c)).reduce(f64::min),
                context,
            });
        }
        Ok(())
    }

    fn online_step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        let bounds = self
            .bounds
            .as_ref()
            .ok_or_else(|| Error::invalid("level bounds not fitted"))?;
        let x = discretize(obs, bounds)?;
        let preds = predictions(&self.policies, &x)?;

        let single = self.cfg.mode == LearnerMode::NoOnlineLearning;
        let explored = !single && self.rng.random::<f64>() < self.weights.gamma;

        // The mixture is computed on every online round, explored or not.
        let (p, q) = if single {
            let mut q = vec![0.0; self.arm_count];
            q[preds[&self.policies[0].id()]] = 1.0;
            (vec![(self.policies[0].id(), 1.0)], q)
        } else {
            let p = policy_distribution(&self.weights)?;
            let q = arm_distribution_from(&p, &preds, self.arm_count)?;
            (p, q)
        };
        let p_sum = Some(p.iter().map(|(_, v)| v).sum());
        let mut policy_id = None;
        let arm = if explored {
            self.rng.random_range(0..self.arm_count)
        } else {
            let picked = if single { p[0].0 } else { p[sample_index(p.iter().map(|(_, v)| *v), &mut self.rng)].0 };
            policy_id = Some(picked);
            preds[&picked]
        };

        let raw = cost_of(arm);
        self.memory.push(DataPoint {
            slot,
            delays: obs.to_vec(),
            arm,
            cost: raw,
        })?;
        let (c_min, c_max) = self.memory.cost_range().expect("memory is non-empty");
        let norm = normalize_cost(raw, c_min, c_max);
        if !explored && !single {
            let fake = fake_costs(arm, norm, &q)?;
            update_weights_from(&mut self.weights, &fake, &preds)?;
        }

        let (oracle_cost, best_arm_cost) = if self.cfg.evaluate {
            let all: Vec<f64> = (0..self.arm_count).map(|a| normalize_cost(cost_of(a), c_min, c_max)).collect();
            let oracle = if single {
                Some(all[preds[&self.policies[0].id()]])
            } else {
                preds.values().map(|&a| all[a]).reduce(f64::min)
            };
            (oracle, all.iter().copied().reduce(f64::min))
        } else {
            (None, None)
        };

        self.rounds += 1;
        self.online_rounds += 1;
        if self.online_rounds.is_multiple_of(self.cfg.refresh_interval) {
            match self.cfg.mode {
                LearnerMode::ModDistMab => self.refresh_policies()?,
                LearnerMode::NoPolicyUpdate => {}
                LearnerMode::NoOnlineLearning => {
                    let strategies = self.active_strategies();
                    let old = self.policies[0].id();
                    self.policies = self.generate(&strategies)?;
                    let w = self.weights.remove(old).unwrap_or(1.0);
                    self.weights.set(self.policies[0].id(), w)?;
                }
            }
        }

        Ok(RoundOutcome {
            slot,
            phase: Phase::Online,
            context: Some(x),
            arm,
            raw_cost: raw,
            norm_cost: Some(norm),
            explored,
            policy_id,
            q,
            p_sum,
            oracle_cost,
            best_arm_cost,
        })
    }

    /// Keep the heaviest policy and replace every other one with a freshly
    /// trained policy (same strategy slot) that inherits the old weight.
    pub fn refresh_policies(&mut self) -> Result<()> {
        if self.policies.len() <= 1 {
            return Ok(());
        }
        let mut keep = 0;
        for (i, p) in self.policies.iter().enumerate() {
            let w = self.weights.get(p.id()).unwrap_or(0.0);
            if w > self.weights.get(self.policies[keep].id()).unwrap_or(0.0) {
                keep = i;
            }
        }
        let slots: Vec<usize> = (0..self.policies.len()).filter(|&i| i != keep).collect();
        let strategies: Vec<PolicyStrategy> = slots.iter().map(|&i| self.cfg.strategies[i]).collect();
        let fresh = self.generate(&strategies)?;
        for (slot, policy) in slots.into_iter().zip(fresh) {
            let old = self.policies[slot].id();
            let w = self
                .weights
                .remove(old)
                .ok_or_else(|| Error::Invariant(format!("policy {old} has no weight")))?;
            self.weights.set(policy.id(), w)?;
            self.policies[slot] = policy;
        }
        Ok(())
    }

    /// Refit the level bounds on the current memory and regenerate the whole
    /// policy set with fresh weights. No-op during collection.
    pub fn relearn(&mut self) -> Result<()> {
        if self.bounds.is_none() {
            return Ok(());
        }
        self.bounds = Some(fit_bounds(&self.memory, self.cfg.levels)?);
        let strategies = self.active_strategies();
        self.policies = self.generate(&strategies)?;
        self.weights = WeightTable::new(self.policies.iter().map(Policy::id), self.cfg.gamma, self.cfg.eps_update)?;
        Ok(())
    }

    /// Replace the policy set and reset weights to 1 (tests and replays).
    pub fn install_policies(&mut self, bounds: LevelBounds, policies: Vec<Policy>) -> Result<()> {
        if policies.is_empty() {
            return Err(Error::invalid("policy set is empty"));
        }
        self.next_id = policies.iter().map(Policy::id).max().unwrap() + 1;
        self.weights = WeightTable::new(policies.iter().map(Policy::id), self.cfg.gamma, self.cfg.eps_update)?;
        self.bounds = Some(bounds);
        self.policies = policies;
        self.rounds = self.rounds.max(self.cfg.collection_rounds);
        Ok(())
    }

    /// Set one policy's weight directly.
    pub fn set_weight(&mut self, id: PolicyId, weight: f64) -> Result<()> {
        if self.weights.get(id).is_none() {
            return Err(Error::invalid(format!("unknown policy {id}")));
        }
        self.weights.set(id, weight)
    }

    /// Weights keyed by id, as a plain map.
    pub fn weight_map(&self) -> BTreeMap<PolicyId, f64> {
        self.weights.iter().collect()
    }
}
