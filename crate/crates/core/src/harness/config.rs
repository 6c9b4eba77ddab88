use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit_core::{default_eps_update, default_gamma, LearnerConfig, LearnerMode};
use crate::context_model::DEFAULT_MEMORY_CAPACITY;
use crate::mec_sim::{load_delay_model, load_topology, Simulator};
use crate::policy_gen::{default_strategies, PolicyStrategy};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Moddistmab,
    Fixed,
    Greedy,
    NoPolicyUpdate,
    NoOnlineLearning,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Moddistmab,
        Algorithm::Fixed,
        Algorithm::Greedy,
        Algorithm::NoPolicyUpdate,
        Algorithm::NoOnlineLearning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Moddistmab => "moddistmab",
            Algorithm::Fixed => "fixed",
            Algorithm::Greedy => "greedy",
            Algorithm::NoPolicyUpdate => "no_policy_update",
            Algorithm::NoOnlineLearning => "no_online_learning",
        }
    }

    pub fn learner_mode(self) -> Option<LearnerMode> {
        match self {
            Algorithm::Moddistmab => Some(LearnerMode::ModDistMab),
            Algorithm::NoPolicyUpdate => Some(LearnerMode::NoPolicyUpdate),
            Algorithm::NoOnlineLearning => Some(LearnerMode::NoOnlineLearning),
            Algorithm::Fixed | Algorithm::Greedy => None,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    Static,
    Dynamic,
}

/// One experiment run. Field names in the TOML file match the serde names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: PathBuf,
    pub delay_model: PathBuf,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// Data collection duration.
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    /// Delay levels.
    #[serde(rename = "L", default = "default_l")]
    pub l: u16,
    /// Number of policies.
    #[serde(rename = "P", default = "default_p")]
    pub p: usize,
    /// Policy refresh interval.
    #[serde(rename = "I", default = "default_i")]
    pub i: usize,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub eps_update: Option<f64>,
    /// Horizon in slots.
    #[serde(rename = "T", default = "default_t")]
    pub t: usize,
    #[serde(default = "default_scenario")]
    pub scenario: ScenarioMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Placed modules (Module B plus each Module C instance), one agent each.
    #[serde(default = "default_modules")]
    pub modules: usize,
    /// Per-policy `(sigma, S)`; defaults to [`default_strategies`]`(P)`.
    #[serde(default)]
    pub strategies: Option<Vec<PolicyStrategy>>,
    /// Record counterfactual costs of all arms for regret.
    #[serde(default = "yes")]
    pub evaluate: bool,
    #[serde(default = "default_capacity")]
    pub memory_capacity: usize,
    /// Slots at which every learner refits its bounds and policies.
    #[serde(default)]
    pub relearn_at: Vec<u64>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Moddistmab
}
fn default_n() -> usize {
    30
}
fn default_l() -> u16 {
    3
}
fn default_p() -> usize {
    3
}
fn default_i() -> usize {
    100
}
fn default_t() -> usize {
    4000
}
fn default_scenario() -> ScenarioMode {
    ScenarioMode::Static
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_modules() -> usize {
    3
}
fn yes() -> bool {
    true
}
fn default_capacity() -> usize {
    DEFAULT_MEMORY_CAPACITY
}

impl ExperimentConfig {
    pub fn new(topology: impl Into<PathBuf>, delay_model: impl Into<PathBuf>) -> Self {
        Self {
            topology: topology.into(),
            delay_model: delay_model.into(),
            algorithm: default_algorithm(),
            n: default_n(),
            l: default_l(),
            p: default_p(),
            i: default_i(),
            gamma: None,
            eps_update: None,
            t: default_t(),
            scenario: default_scenario(),
            seed: 0,
            output: default_output(),
            modules: default_modules(),
            strategies: None,
            evaluate: true,
            memory_capacity: default_capacity(),
            relearn_at: Vec::new(),
        }
    }

    /// Parse a TOML experiment file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.topology, &mut cfg.delay_model] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n >= self.t {
            return Err(Error::config(format!("N = {} must be below T = {}", self.n, self.t)));
        }
        if self.l == 0 || self.p == 0 || self.i == 0 || self.modules == 0 {
            return Err(Error::config("L, P, I and modules must all be at least 1"));
        }
        if let Some(s) = &self.strategies {
            if s.len() != self.p {
                return Err(Error::config(format!("{} strategies given for P = {}", s.len(), self.p)));
            }
        }
        Ok(())
    }

    pub fn simulator(&self) -> Result<Simulator> {
        let topology = load_topology(&self.topology)?;
        let mut model = load_delay_model(&self.delay_model, &topology)?;
        match self.scenario {
            ScenarioMode::Static => model.dynamic.enabled = false,
            ScenarioMode::Dynamic => {
                if model.dynamic.arrival_probability <= 0.0 {
                    return Err(Error::config("dynamic scenario needs a [dynamic] section with arrival_probability > 0"));
                }
                model.dynamic.enabled = true;
            }
        }
        Simulator::new(topology, model, self.seed)
    }

    pub fn learner_config(&self, arm_count: usize) -> Result<LearnerConfig> {
        self.validate()?;
        let strategies = self.strategies.clone().unwrap_or_else(|| default_strategies(self.p));
        let cfg = LearnerConfig {
            collection_rounds: self.n,
            levels: self.l,
            refresh_interval: self.i,
            gamma: self.gamma.unwrap_or_else(|| default_gamma(self.t)),
            eps_update: self
                .eps_update
                .unwrap_or_else(|| default_eps_update(self.p, self.t, arm_count)),
            strategies,
            memory_capacity: self.memory_capacity,
            mode: self.algorithm.learner_mode().unwrap_or(LearnerMode::ModDistMab),
            evaluate: self.evaluate,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
