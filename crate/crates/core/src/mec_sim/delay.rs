use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::topology::{Arm, NetworkTopology};
use crate::{rng, Error, Result};

/// Base-delay distribution of one server or link, in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DelayDist {
    /// `exp(N(mu, sigma^2))`; `mu` is the log of the median in ms.
    LogNormal { mu: f64, sigma: f64 },
    Constant { ms: f64 },
    /// Uniform pick among a finite set of delays.
    Choice { values_ms: Vec<f64> },
}

impl DelayDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DelayDist::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma >= 0.0 && mu.abs() < 50.0,
            DelayDist::Constant { ms } => ms.is_finite() && *ms > 0.0,
            DelayDist::Choice { values_ms } => {
                !values_ms.is_empty() && values_ms.iter().all(|v| v.is_finite() && *v > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid delay distribution {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DelayDist::LogNormal { mu, sigma } if *sigma == 0.0 => mu.exp(),
            DelayDist::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma)
                .expect("validated parameters")
                .sample(rng),
            DelayDist::Constant { ms } => *ms,
            DelayDist::Choice { values_ms } => values_ms[rng.random_range(0..values_ms.len())],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DelayDist::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            DelayDist::Constant { ms } => *ms,
            DelayDist::Choice { values_ms } => values_ms.iter().sum::<f64>() / values_ms.len() as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            DelayDist::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
            DelayDist::Constant { .. } => 0.0,
            DelayDist::Choice { values_ms } => {
                let m = self.mean();
                values_ms.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values_ms.len() as f64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerDelay {
    pub delay: DelayDist,
    /// Extra processing delay per co-located module, ms.
    pub load_penalty_ms: f64,
}

/// Background-task process of the dynamic scenario.
///
/// Each slot, every server and link independently hosts a background task
/// with `arrival_probability`; a hit multiplies that entity's delay by a
/// factor drawn uniformly from `inflation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicMode {
    pub enabled: bool,
    pub arrival_probability: f64,
    pub inflation: [f64; 2],
}

impl Default for DynamicMode {
    fn default() -> Self {
        Self {
            enabled: false,
            arrival_probability: 0.0,
            inflation: [1.0, 1.0],
        }
    }
}

impl DynamicMode {
    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.inflation;
        if !(0.0..=1.0).contains(&self.arrival_probability) || !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!("invalid dynamic-mode parameters {self:?}")));
        }
        Ok(())
    }
}

/// Delay parameters aligned index-for-index with a topology.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayModel {
    pub servers: Vec<ServerDelay>,
    pub links: Vec<DelayDist>,
    pub dynamic: DynamicMode,
}

impl DelayModel {
    pub fn validate_for(&self, topology: &NetworkTopology) -> Result<()> {
        if self.servers.len() != topology.server_count() {
            return Err(Error::config(format!(
                "delay model has {} servers, topology has {}",
                self.servers.len(),
                topology.server_count()
            )));
        }
        if self.links.len() != topology.link_count() {
            return Err(Error::config(format!(
                "delay model has {} links, topology has {}",
                self.links.len(),
                topology.link_count()
            )));
        }
        for s in &self.servers {
            s.delay.validate()?;
            if !(s.load_penalty_ms.is_finite() && s.load_penalty_ms >= 0.0) {
                return Err(Error::config("load penalty must be finite and non-negative"));
            }
        }
        for l in &self.links {
            l.validate()?;
        }
        self.dynamic.validate()
    }

    /// Same delay for every server and link, no load penalty, static.
    pub fn uniform(topology: &NetworkTopology, dist: DelayDist) -> Self {
        Self {
            servers: vec![
                ServerDelay {
                    delay: dist.clone(),
                    load_penalty_ms: 0.0,
                };
                topology.server_count()
            ],
            links: vec![dist; topology.link_count()],
            dynamic: DynamicMode::default(),
        }
    }
}

/// Delays realized in one time slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotObservation {
    pub slot: u64,
    pub server_delays: Vec<f64>,
    pub link_delays: Vec<f64>,
}

impl SlotObservation {
    /// Servers first, then links.
    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.server_delays.iter().chain(self.link_delays.iter()).copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.delays().collect()
    }

    pub fn from_flat(slot: u64, server_count: usize, delays: &[f64]) -> Self {
        Self {
            slot,
            server_delays: delays[..server_count].to_vec(),
            link_delays: delays[server_count..].to_vec(),
        }
    }

    /// The observation as seen by a module placed after others in the same
    /// slot: each server's delay includes its current load penalty.
    pub fn with_load(&self, model: &DelayModel, load: &[u32]) -> Self {
        let mut out = self.clone();
        for ((d, l), s) in out.server_delays.iter_mut().zip(load).zip(&model.servers) {
            *d += s.load_penalty_ms * f64::from(*l);
        }
        out
    }
}

const SLOT_STREAM_TAG: u64 = 0x5107;

/// Draw the delays of one slot. Deterministic in `(seed, slot)`.
pub fn sample_slot(model: &DelayModel, topology: &NetworkTopology, slot: u64, seed: u64) -> Result<SlotObservation> {
    model.validate_for(topology)?;
    Ok(sample_unchecked(model, slot, seed))
}

fn sample_unchecked(model: &DelayModel, slot: u64, seed: u64) -> SlotObservation {
    let mut r = rng::stream(seed, SLOT_STREAM_TAG);
    r.set_stream(slot);
    let mut server_delays: Vec<f64> = model.servers.iter().map(|s| s.delay.sample(&mut r)).collect();
    let mut link_delays: Vec<f64> = model.links.iter().map(|l| l.sample(&mut r)).collect();
    if model.dynamic.enabled {
        let [lo, hi] = model.dynamic.inflation;
        for d in server_delays.iter_mut().chain(link_delays.iter_mut()) {
            let hit = r.random::<f64>() < model.dynamic.arrival_probability;
            let factor = if hi > lo { r.random_range(lo..hi) } else { lo };
            if hit {
                *d *= factor;
            }
        }
    }
    SlotObservation {
        slot,
        server_delays,
        link_delays,
    }
}

/// Raw end-to-end cost of placing one module on `arm`, in ms:
/// link delay + server delay + load penalty x modules already on the server.
pub fn end_to_end_cost(obs: &SlotObservation, arm: Arm, load: &[u32], model: &DelayModel) -> Result<f64> {
    let link = obs
        .link_delays
        .get(arm.link.0)
        .ok_or_else(|| Error::invalid(format!("unknown link index {}", arm.link.0)))?;
    let server = obs
        .server_delays
        .get(arm.server.0)
        .ok_or_else(|| Error::invalid(format!("unknown server index {}", arm.server.0)))?;
    let penalty = model.servers.get(arm.server.0).map_or(0.0, |s| s.load_penalty_ms);
    let count = load.get(arm.server.0).copied().unwrap_or(0);
    Ok(link + server + penalty * f64::from(count))
}

/// Topology, delay model and seed bundled together.
#[derive(Clone, Debug)]
pub struct Simulator {
    topology: NetworkTopology,
    model: DelayModel,
    arms: Vec<Arm>,
    seed: u64,
}

impl Simulator {
    pub fn new(topology: NetworkTopology, model: DelayModel, seed: u64) -> Result<Self> {
        model.validate_for(&topology)?;
        let arms = topology.arms();
        Ok(Self {
            topology,
            model,
            arms,
            seed,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn sample_slot(&self, slot: u64) -> SlotObservation {
        sample_unchecked(&self.model, slot, self.seed)
    }

    pub fn cost(&self, obs: &SlotObservation, arm: Arm, load: &[u32]) -> Result<f64> {
        self.topology.check_arm(arm)?;
        end_to_end_cost(obs, arm, load, &self.model)
    }
}
