//! Joint identity/attribute training losses with analytic gradients.
//!
//! All functions are pure. Probabilities inside a logarithm are clamped from
//! below at [`PROB_FLOOR`], which keeps every loss finite.

use crate::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-7;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_SIGMA_ATTR: f64 = 1.0;
const ROW_SUM_TOL: f64 = 1e-9;

fn check_rect(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || cols == 0 {
        return Err(Error::invalid(format!("{what}: empty batch")));
    }
    for r in rows {
        if r.len() != cols {
            return Err(Error::Dimension {
                expected: cols,
                actual: r.len(),
            });
        }
    }
    Ok(cols)
}

/// Identity predictions `N x K` with their class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ReidBatch {
    classes: usize,
    predictions: Vec<f64>,
    labels: Vec<usize>,
}

impl ReidBatch {
    /// `labels` is the one-hot matrix; every row must hold exactly one 1.
    pub fn new(predictions: Vec<Vec<f64>>, labels: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::Dimension {
                expected: predictions.len(),
                actual: labels.len(),
            });
        }
        let k = check_rect(&predictions, "reid predictions")?;
        let mut idx = Vec::with_capacity(labels.len());
        for row in &labels {
            if row.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    actual: row.len(),
                });
            }
            let ones: Vec<usize> = (0..k).filter(|&c| row[c] == 1.0).collect();
            if ones.len() != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid("label row is not one-hot"));
            }
            idx.push(ones[0]);
        }
        Self::from_classes(predictions, idx)
    }

    pub fn from_classes(predictions: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::Dimension {
                expected: predictions.len(),
                actual: labels.len(),
            });
        }
        let k = check_rect(&predictions, "reid predictions")?;
        for row in &predictions {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid("reid prediction outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("reid prediction row sums to {s}")));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
        }
        Ok(Self {
            classes: k,
            predictions: predictions.into_iter().flatten().collect(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn at(&self, i: usize, k: usize) -> f64 {
        self.predictions[i * self.classes + k]
    }
}

/// `-(1/N) sum_i log p_i[y_i]`.
pub fn loss_reid(batch: &ReidBatch) -> f64 {
    let n = batch.len() as f64;
    -batch
        .labels
        .iter()
        .enumerate()
        .map(|(i, &y)| batch.at(i, y).max(PROB_FLOOR).ln())
        .sum::<f64>()
        / n
}

/// Row-major `N x K` gradient of [`loss_reid`] with respect to the predictions.
pub fn grad_reid(batch: &ReidBatch) -> Vec<f64> {
    let n = batch.len() as f64;
    let mut g = vec![0.0; batch.predictions.len()];
    for (i, &y) in batch.labels.iter().enumerate() {
        let p = batch.at(i, y);
        if p >= PROB_FLOOR {
            g[i * batch.classes + y] = -1.0 / (n * p);
        }
    }
    g
}

/// `w_j = exp(-rho_j / sigma^2)`.
pub fn attr_weights(ratios: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma_attr must be positive, got {sigma}")));
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("attribute ratios must lie in [0, 1]"));
    }
    Ok(ratios.iter().map(|r| (-r / (sigma * sigma)).exp()).collect())
}

/// Attribute predictions `N x M`, binary labels and per-attribute weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AttrBatch {
    attributes: usize,
    predictions: Vec<f64>,
    labels: Vec<f64>,
    weights: Vec<f64>,
}

impl AttrBatch {
    /// Weights from the training-set ratios `rho` via [`attr_weights`].
    pub fn new(predictions: Vec<Vec<f64>>, labels: Vec<Vec<f64>>, ratios: &[f64], sigma: f64) -> Result<Self> {
        Self::with_weights(predictions, labels, attr_weights(ratios, sigma)?)
    }

    pub fn with_weights(predictions: Vec<Vec<f64>>, labels: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = check_rect(&predictions, "attribute predictions")?;
        if labels.len() != predictions.len() {
            return Err(Error::Dimension {
                expected: predictions.len(),
                actual: labels.len(),
            });
        }
        if weights.len() != m {
            return Err(Error::Dimension {
                expected: m,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("attribute weights must be finite and non-negative"));
        }
        for row in &labels {
            if row.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    actual: row.len(),
                });
            }
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid("attribute label is not binary"));
            }
        }
        if predictions.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("attribute prediction outside [0, 1]"));
        }
        Ok(Self {
            attributes: m,
            predictions: predictions.into_iter().flatten().collect(),
            labels: labels.into_iter().flatten().collect(),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len() / self.attributes
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `-(1/N) sum_ij w_j (y log p + (1 - y) log(1 - p))`.
pub fn loss_attr(batch: &AttrBatch) -> f64 {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for (idx, (&p, &y)) in batch.predictions.iter().zip(&batch.labels).enumerate() {
        let w = batch.weights[idx % batch.attributes];
        let term = if y == 1.0 { p.max(PROB_FLOOR).ln() } else { (1.0 - p).max(PROB_FLOOR).ln() };
        total += w * term;
    }
    -total / n
}

/// Row-major `N x M` gradient of [`loss_attr`].
pub fn grad_attr(batch: &AttrBatch) -> Vec<f64> {
    let n = batch.len() as f64;
    batch
        .predictions
        .iter()
        .zip(&batch.labels)
        .enumerate()
        .map(|(idx, (&p, &y))| {
            let w = batch.weights[idx % batch.attributes];
            if y == 1.0 {
                if p >= PROB_FLOOR {
                    -w / (n * p)
                } else {
                    0.0
                }
            } else if 1.0 - p >= PROB_FLOOR {
                w / (n * (1.0 - p))
            } else {
                0.0
            }
        })
        .collect()
}

/// `lambda * reid + (1 - lambda) / M * attr`, with `lambda` in [0, 1] and `M >= 1`.
pub fn loss_total(reid: f64, attr: f64, lambda: f64, attributes: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&lambda) && attributes >= 1);
    lambda * reid + (1.0 - lambda) / attributes as f64 * attr
}

#[derive(Clone, Debug, PartialEq)]
pub struct TotalGradient {
    pub reid: Vec<f64>,
    pub attr: Vec<f64>,
}

/// Gradient of [`loss_total`] evaluated on the two batches.
pub fn grad_total(reid: &ReidBatch, attr: &AttrBatch, lambda: f64) -> TotalGradient {
    let scale = (1.0 - lambda) / attr.attributes() as f64;
    TotalGradient {
        reid: grad_reid(reid).into_iter().map(|g| lambda * g).collect(),
        attr: grad_attr(attr).into_iter().map(|g| scale * g).collect(),
    }
}
