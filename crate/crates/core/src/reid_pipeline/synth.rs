use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::feature::{AttributeVector, Feature, FrameInfo};
use super::identity::IdentityId;
use crate::{Error, Result};

pub const DEFAULT_FEATURE_DIM: usize = 512;

/// Stand-in for the CNN: every identity has a fixed unit prototype, and
/// each sighting is the prototype plus isotropic noise, renormalized.
#[derive(Clone, Debug)]
pub struct SyntheticStream {
    prototypes: Vec<Vec<f64>>,
    attributes: Vec<Vec<f64>>,
    noise: Normal<f64>,
    attr_noise: f64,
    rng: ChaCha8Rng,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

impl SyntheticStream {
    /// `noise` is the expected L2 norm of the perturbation: each component
    /// gets `N(0, noise^2 / dim)`.
    pub fn new(identities: usize, dim: usize, attributes: usize, noise: f64, seed: u64) -> Result<Self> {
        if identities == 0 || dim == 0 {
            return Err(Error::invalid("synthetic stream needs identities and a positive dimension"));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::invalid(format!("noise must be non-negative, got {noise}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prototypes = (0..identities)
            .map(|_| unit((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()))
            .collect();
        let attributes = (0..identities)
            .map(|_| (0..attributes).map(|_| rng.random::<f64>()).collect())
            .collect();
        let noise = Normal::new(0.0, noise / (dim as f64).sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self {
            prototypes,
            attributes,
            noise,
            attr_noise: 0.05,
            rng,
        })
    }

    pub fn identities(&self) -> usize {
        self.prototypes.len()
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn prototype(&self, identity: IdentityId) -> Option<&[f64]> {
        self.prototypes.get(identity as usize).map(Vec::as_slice)
    }

    pub fn sample(&mut self, identity: IdentityId, frame: FrameInfo) -> Result<Feature> {
        let proto = self
            .prototypes
            .get(identity as usize)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic identity {identity}")))?;
        let v = proto.iter().map(|p| p + self.noise.sample(&mut self.rng)).collect();
        Feature::new(v, frame)
    }

    /// The identity's attribute probabilities jittered by a little noise.
    pub fn sample_attributes(&mut self, identity: IdentityId) -> Result<AttributeVector> {
        let base = self
            .attributes
            .get(identity as usize)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic identity {identity}")))?;
        let jitter = self.attr_noise;
        let v = base
            .iter()
            .map(|b| (b + jitter * self.rng.random_range(-1.0..1.0)).clamp(0.0, 1.0))
            .collect();
        AttributeVector::new(v)
    }

    /// Uniformly random identity.
    pub fn pick_identity(&mut self) -> IdentityId {
        self.rng.random_range(0..self.prototypes.len() as u64)
    }
}
