use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::reid_pipeline::{
    cmc_map, CmcReport, Decision, FrameInfo, IdentityId, JunkRule, LabeledFeature, ReidSystem, SearchMode, SyntheticStream,
    DEFAULT_BETA, DEFAULT_FEATURE_DIM, DEFAULT_THRESHOLD,
};
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReidStreamConfig {
    pub identities: usize,
    pub queries: usize,
    #[serde(default = "default_cameras")]
    pub cameras: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_attributes")]
    pub attributes: usize,
    /// Expected L2 norm of the per-sighting feature noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_mode")]
    pub mode: SearchMode,
    /// Visit identities in order `q % identities` instead of at random.
    #[serde(default)]
    pub cycle_identities: bool,
    /// Ranks reported in the CMC curves.
    #[serde(default = "default_max_rank")]
    pub max_rank: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_cameras() -> usize {
    4
}
fn default_dim() -> usize {
    DEFAULT_FEATURE_DIM
}
fn default_attributes() -> usize {
    12
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_mode() -> SearchMode {
    SearchMode::Sharded
}
fn default_max_rank() -> usize {
    10
}

impl ReidStreamConfig {
    pub fn new(identities: usize, queries: usize) -> Self {
        Self {
            identities,
            queries,
            cameras: default_cameras(),
            dim: default_dim(),
            attributes: default_attributes(),
            noise: 0.0,
            threshold: default_threshold(),
            beta: default_beta(),
            mode: default_mode(),
            cycle_identities: false,
            max_rank: default_max_rank(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.identities == 0 || self.cameras == 0 || self.dim == 0 || self.max_rank == 0 {
            return Err(Error::config("identities, cameras, dim and max_rank must all be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold must lie in (0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("beta must lie in (0, 1)"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReidStreamReport {
    pub decisions: Vec<Decision>,
    /// Ground-truth identity of every query.
    pub truth: Vec<IdentityId>,
    pub new_identities: usize,
    /// First sightings judged new, repeat sightings matched to the id the
    /// identity received at its first sighting.
    pub identity_accuracy: f64,
    /// Share of new-identity decisions made on true first sightings.
    pub new_identity_precision: f64,
    pub conventional: CmcReport,
    pub framejunk: CmcReport,
}

/// Stream synthetic sightings through search, decision, fusion and gallery
/// update, then score one held-out sighting per identity against the final
/// gallery.
pub fn run_reid_stream(cfg: &ReidStreamConfig) -> Result<ReidStreamReport> {
    cfg.validate()?;
    let mut source = SyntheticStream::new(cfg.identities, cfg.dim, cfg.attributes, cfg.noise, rng::derive(cfg.seed, 0xFEA7))?;
    let mut pick = ChaCha8Rng::seed_from_u64(rng::derive(cfg.seed, 0xCA3E));
    let mut system = ReidSystem::new(cfg.cameras, cfg.threshold, cfg.beta, cfg.mode)?;
    let mut assigned: BTreeMap<IdentityId, IdentityId> = BTreeMap::new();
    let mut labeled = Vec::with_capacity(cfg.queries);
    let (mut decisions, mut truth) = (Vec::with_capacity(cfg.queries), Vec::with_capacity(cfg.queries));
    let (mut correct, mut new_total, mut new_correct) = (0usize, 0usize, 0usize);
    for q in 0..cfg.queries {
        let person = if cfg.cycle_identities {
            (q % cfg.identities) as IdentityId
        } else {
            pick.random_range(0..cfg.identities as IdentityId)
        };
        let frame = FrameInfo {
            camera: pick.random_range(0..cfg.cameras),
            frame: q as u64,
        };
        let feature = source.sample(person, frame)?;
        let attrs = source.sample_attributes(person)?;
        labeled.push(LabeledFeature {
            feature: feature.clone(),
            identity: person,
        });
        let decision = system.process(feature, attrs)?;
        let first = !assigned.contains_key(&person);
        match (decision, assigned.get(&person)) {
            (Decision::New(id), None) => {
                assigned.insert(person, id);
                correct += 1;
            }
            (Decision::Existing(id), Some(&want)) if id == want => correct += 1,
            (Decision::New(_), Some(_)) | (Decision::Existing(_), _) => {}
        }
        if decision.is_new() {
            new_total += 1;
            new_correct += first as usize;
        }
        decisions.push(decision);
        truth.push(person);
    }
    let held_out: Vec<LabeledFeature> = (0..cfg.identities as IdentityId)
        .map(|person| {
            let frame = FrameInfo {
                camera: pick.random_range(0..cfg.cameras),
                frame: (cfg.queries as u64) + person,
            };
            source.sample(person, frame).map(|feature| LabeledFeature { feature, identity: person })
        })
        .collect::<Result<_>>()?;
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(ReidStreamReport {
        new_identities: new_total,
        identity_accuracy: ratio(correct, cfg.queries),
        new_identity_precision: ratio(new_correct, new_total),
        conventional: cmc_map(&held_out, &labeled, JunkRule::Conventional, cfg.max_rank)?,
        framejunk: cmc_map(&held_out, &labeled, JunkRule::Framejunk, cfg.max_rank)?,
        decisions,
        truth,
    })
}
