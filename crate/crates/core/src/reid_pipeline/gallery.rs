use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feature::Feature;
use super::identity::{Decision, IdentityId};
use crate::{Error, Result};

/// Best match a shard reports for a query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMatch {
    pub similarity: f64,
    pub identity: IdentityId,
}

impl LocalMatch {
    /// Higher similarity wins; equal similarity goes to the lower id.
    pub(crate) fn better_than(&self, other: &LocalMatch) -> bool {
        self.similarity > other.similarity || (self.similarity == other.similarity && self.identity < other.identity)
    }
}

pub(crate) fn best_of(matches: impl IntoIterator<Item = LocalMatch>) -> Option<LocalMatch> {
    matches.into_iter().fold(None, |best, m| match best {
        Some(b) if !m.better_than(&b) => Some(b),
        _ => Some(m),
    })
}

/// Features of pedestrians seen by one camera.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GalleryShard {
    camera: usize,
    entries: Vec<(Feature, IdentityId)>,
}

impl GalleryShard {
    pub fn new(camera: usize) -> Self {
        Self {
            camera,
            entries: Vec::new(),
        }
    }

    pub fn camera(&self) -> usize {
        self.camera
    }

    pub fn entries(&self) -> &[(Feature, IdentityId)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append; the feature must have originated at this shard's camera.
    pub fn push(&mut self, feature: Feature, identity: IdentityId) -> Result<()> {
        if feature.camera() != self.camera {
            return Err(Error::invalid(format!(
                "feature from camera {} cannot enter the gallery of camera {}",
                feature.camera(),
                self.camera
            )));
        }
        self.entries.push((feature, identity));
        Ok(())
    }

    /// Maximum cosine similarity over all entries, `None` when empty.
    pub fn local_match(&self, query: &Feature) -> Result<Option<LocalMatch>> {
        let mut best = None;
        for (f, id) in &self.entries {
            let m = LocalMatch {
                similarity: query.similarity(f)?,
                identity: *id,
            };
            best = best_of(best.into_iter().chain([m]));
        }
        Ok(best)
    }
}

/// How a [`Gallery`] answers queries: shard-local maxima reduced globally,
/// or one scan over the union of all shards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Sharded,
    Centralized,
}

/// One shard per camera, indexed by camera id.
#[derive(Clone, Debug, PartialEq)]
pub struct Gallery {
    shards: Vec<GalleryShard>,
}

impl Gallery {
    pub fn new(cameras: usize) -> Self {
        Self {
            shards: (0..cameras).map(GalleryShard::new).collect(),
        }
    }

    pub fn shards(&self) -> &[GalleryShard] {
        &self.shards
    }

    pub fn shard(&self, camera: usize) -> Option<&GalleryShard> {
        self.shards.get(camera)
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(GalleryShard::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.iter().all(GalleryShard::is_empty)
    }

    pub fn entries(&self) -> impl Iterator<Item = &(Feature, IdentityId)> {
        self.shards.iter().flat_map(|s| s.entries.iter())
    }

    /// Each non-empty shard's best match, searched concurrently.
    pub fn local_matches(&self, query: &Feature) -> Result<Vec<LocalMatch>> {
        let found: Vec<Option<LocalMatch>> = self.shards.par_iter().map(|s| s.local_match(query)).collect::<Result<_>>()?;
        Ok(found.into_iter().flatten().collect())
    }

    /// Single scan over the union of all shards.
    pub fn centralized_match(&self, query: &Feature) -> Result<Option<LocalMatch>> {
        let mut best = None;
        for (f, id) in self.entries() {
            let m = LocalMatch {
                similarity: query.similarity(f)?,
                identity: *id,
            };
            best = best_of(best.into_iter().chain([m]));
        }
        Ok(best)
    }

    pub fn search(&self, query: &Feature, mode: SearchMode) -> Result<Vec<LocalMatch>> {
        match mode {
            SearchMode::Sharded => self.local_matches(query),
            SearchMode::Centralized => Ok(self.centralized_match(query)?.into_iter().collect()),
        }
    }

    /// Append the query under the decided id to its origin camera's shard.
    pub fn update(&mut self, decision: Decision, query: Feature) -> Result<()> {
        let camera = query.camera();
        let shards = self.shards.len();
        let shard = self
            .shards
            .get_mut(camera)
            .ok_or_else(|| Error::invalid(format!("unknown camera {camera} (gallery has {shards})")))?;
        shard.push(query, decision.id())
    }

    /// Insert a known entry, growing the shard list if needed.
    pub fn insert(&mut self, feature: Feature, identity: IdentityId) -> Result<()> {
        while self.shards.len() <= feature.camera() {
            self.shards.push(GalleryShard::new(self.shards.len()));
        }
        self.shards[feature.camera()].push(feature, identity)
    }
}
