use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Where and when a feature was observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrameInfo {
    pub camera: usize,
    pub frame: u64,
}

/// A unit-norm appearance feature tagged with its origin frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    values: Vec<f64>,
    frame: FrameInfo,
}

impl Feature {
    /// L2-normalizes `values`; rejects empty, non-finite or zero vectors.
    pub fn new(mut values: Vec<f64>, frame: FrameInfo) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature has no components"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature has non-finite components"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("feature has zero norm"));
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(Self { values, frame })
    }

    /// Keep `values` as given when already unit-norm within 1e-9, so stored
    /// features reload bit for bit; otherwise normalize like [`Feature::new`].
    pub fn from_unit(values: Vec<f64>, frame: FrameInfo) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.iter().all(|v| v.is_finite()) && !values.is_empty() && (norm - 1.0).abs() <= 1e-9 {
            return Ok(Self { values, frame });
        }
        Self::new(values, frame)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn frame(&self) -> FrameInfo {
        self.frame
    }

    pub fn camera(&self) -> usize {
        self.frame.camera
    }

    /// Cosine similarity, i.e. the dot product of the two unit vectors.
    pub fn similarity(&self, other: &Feature) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }
}

/// Per-attribute probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector(Vec<f64>);

impl AttributeVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("attribute probability outside [0, 1]"));
        }
        Ok(Self(probs))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
