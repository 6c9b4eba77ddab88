use std::collections::BTreeMap;

use super::feature::{AttributeVector, Feature, FrameInfo};
use super::gallery::{best_of, Gallery, LocalMatch, SearchMode};
use crate::{Error, Result};

pub type IdentityId = u64;

pub const DEFAULT_BETA: f64 = 0.7;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Existing(IdentityId),
    New(IdentityId),
}

impl Decision {
    pub fn id(self) -> IdentityId {
        match self {
            Decision::Existing(id) | Decision::New(id) => id,
        }
    }

    pub fn is_new(self) -> bool {
        matches!(self, Decision::New(_))
    }
}

/// `beta * old + (1 - beta) * new`, entrywise.
pub fn fuse_attributes(old: &AttributeVector, new: &AttributeVector, beta: f64) -> Result<AttributeVector> {
    if old.len() != new.len() {
        return Err(Error::Dimension {
            expected: old.len(),
            actual: new.len(),
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("fusion coefficient must lie in (0, 1), got {beta}")));
    }
    let fused = old
        .values()
        .iter()
        .zip(new.values())
        // o + (1 - beta)(n - o) is the same recursion and keeps old == new exact.
        .map(|(o, n)| (o + (1.0 - beta) * (n - o)).clamp(0.0, 1.0))
        .collect();
    AttributeVector::new(fused)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonInstance {
    pub id: IdentityId,
    pub attributes: AttributeVector,
    pub sightings: Vec<FrameInfo>,
}

/// The single authority that decides identities and allocates ids.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityRegistry {
    next_id: IdentityId,
    beta: f64,
    instances: BTreeMap<IdentityId, PersonInstance>,
}

impl Default for IdentityRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_BETA).expect("default beta is valid")
    }
}

impl IdentityRegistry {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("fusion coefficient must lie in (0, 1), got {beta}")));
        }
        Ok(Self {
            next_id: 0,
            beta,
            instances: BTreeMap::new(),
        })
    }

    pub fn instances(&self) -> impl Iterator<Item = &PersonInstance> {
        self.instances.values()
    }

    pub fn instance(&self, id: IdentityId) -> Option<&PersonInstance> {
        self.instances.get(&id)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Id the next new identity will receive.
    pub fn next_id(&self) -> IdentityId {
        self.next_id
    }

    /// Make sure future ids never collide with `id` (e.g. after importing a gallery).
    pub fn reserve(&mut self, id: IdentityId) {
        self.next_id = self.next_id.max(id + 1);
    }

    /// Reduce local maxima to a decision: strictly above `threshold` keeps the
    /// matched id and fuses attributes, otherwise a fresh id is allocated.
    pub fn decide(&mut self, locals: &[LocalMatch], query: &Feature, attrs: AttributeVector, threshold: f64) -> Result<Decision> {
        let best = best_of(locals.iter().copied());
        let frame = query.frame();
        match best {
            Some(m) if m.similarity > threshold => {
                match self.instances.get_mut(&m.identity) {
                    Some(inst) => {
                        inst.attributes = fuse_attributes(&inst.attributes, &attrs, self.beta)?;
                        inst.sightings.push(frame);
                    }
                    None => {
                        self.reserve(m.identity);
                        self.instances.insert(
                            m.identity,
                            PersonInstance {
                                id: m.identity,
                                attributes: attrs,
                                sightings: vec![frame],
                            },
                        );
                    }
                }
                Ok(Decision::Existing(m.identity))
            }
            _ => {
                let id = self.next_id;
                self.next_id += 1;
                self.instances.insert(
                    id,
                    PersonInstance {
                        id,
                        attributes: attrs,
                        sightings: vec![frame],
                    },
                );
                Ok(Decision::New(id))
            }
        }
    }
}

/// Free-function form of [`IdentityRegistry::decide`].
pub fn global_decide(
    registry: &mut IdentityRegistry,
    locals: &[LocalMatch],
    query: &Feature,
    attrs: AttributeVector,
    threshold: f64,
) -> Result<Decision> {
    registry.decide(locals, query, attrs, threshold)
}

/// Gallery, registry and threshold wired together: search, decide, update.
#[derive(Clone, Debug)]
pub struct ReidSystem {
    pub gallery: Gallery,
    pub registry: IdentityRegistry,
    pub threshold: f64,
    pub mode: SearchMode,
}

impl ReidSystem {
    pub fn new(cameras: usize, threshold: f64, beta: f64, mode: SearchMode) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::invalid(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        Ok(Self {
            gallery: Gallery::new(cameras),
            registry: IdentityRegistry::new(beta)?,
            threshold,
            mode,
        })
    }

    pub fn process(&mut self, query: Feature, attrs: AttributeVector) -> Result<Decision> {
        if query.camera() >= self.gallery.shards().len() {
            return Err(Error::invalid(format!("unknown camera {}", query.camera())));
        }
        let locals = self.gallery.search(&query, self.mode)?;
        let decision = self.registry.decide(&locals, &query, attrs, self.threshold)?;
        self.gallery.update(decision, query)?;
        Ok(decision)
    }
}
