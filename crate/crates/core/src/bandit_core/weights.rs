use std::collections::BTreeMap;

use rand::Rng;

use crate::context_model::Context;
use crate::policy_gen::{Policy, PolicyId};
use crate::{Error, Result};

/// Below this the whole table is rescaled so the largest weight is 1.
const RESCALE_BELOW: f64 = 1e-200;

/// Online weight per policy, plus the exploration rate and update parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    weights: BTreeMap<PolicyId, f64>,
    pub gamma: f64,
    pub eps_update: f64,
}

impl WeightTable {
    pub fn new(ids: impl IntoIterator<Item = PolicyId>, gamma: f64, eps_update: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma = {gamma} outside [0, 1]")));
        }
        if !(eps_update > 0.0 && eps_update < 0.5) {
            return Err(Error::invalid(format!("eps_update = {eps_update} outside (0, 1/2)")));
        }
        Ok(Self {
            weights: ids.into_iter().map(|id| (id, 1.0)).collect(),
            gamma,
            eps_update,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, id: PolicyId) -> Option<f64> {
        self.weights.get(&id).copied()
    }

    pub fn set(&mut self, id: PolicyId, weight: f64) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Invariant(format!("policy weight {weight} is not positive")));
        }
        self.weights.insert(id, weight);
        Ok(())
    }

    pub fn remove(&mut self, id: PolicyId) -> Option<f64> {
        self.weights.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PolicyId, f64)> + '_ {
        self.weights.iter().map(|(&k, &v)| (k, v))
    }

    /// True when `gamma` lies in `[0, 1/sqrt(T))`, the range the regret bound covers.
    pub fn gamma_within_bound(&self, horizon: usize) -> bool {
        self.gamma >= 0.0 && self.gamma < 1.0 / (horizon as f64).sqrt()
    }
}

/// `p(pi) = w(pi) / sum w`, in policy-id order.
pub fn policy_distribution(w: &WeightTable) -> Result<Vec<(PolicyId, f64)>> {
    if w.is_empty() {
        return Err(Error::invalid("policy set is empty"));
    }
    let total: f64 = w.weights.values().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Invariant(format!("total policy weight {total}")));
    }
    Ok(w.iter().map(|(id, v)| (id, v / total)).collect())
}

/// Each policy's prediction at `x`, keyed by id.
pub fn predictions(policies: &[Policy], x: &Context) -> Result<BTreeMap<PolicyId, usize>> {
    policies.iter().map(|p| Ok((p.id(), p.predict(x)?))).collect()
}

/// `q(a) = sum of p(pi) over policies choosing a at x`.
pub fn arm_distribution(p: &[(PolicyId, f64)], policies: &[Policy], x: &Context, arm_count: usize) -> Result<Vec<f64>> {
    arm_distribution_from(p, &predictions(policies, x)?, arm_count)
}

pub(crate) fn arm_distribution_from(
    p: &[(PolicyId, f64)],
    chosen: &BTreeMap<PolicyId, usize>,
    arm_count: usize,
) -> Result<Vec<f64>> {
    let mut q = vec![0.0; arm_count];
    for (id, prob) in p {
        let arm = *chosen
            .get(id)
            .ok_or_else(|| Error::Invariant(format!("no prediction for policy {id}")))?;
        if arm >= arm_count {
            return Err(Error::Invariant(format!("policy {id} chose arm {arm} of {arm_count}")));
        }
        q[arm] += prob;
    }
    Ok(q)
}

/// `(raw - c_min) / (c_max - c_min)` clamped to `[0, 1]`; zero on a degenerate range.
pub fn normalize_cost(raw: f64, c_min: f64, c_max: f64) -> f64 {
    let span = c_max - c_min;
    if !(span > 0.0) {
        return 0.0;
    }
    ((raw - c_min) / span).clamp(0.0, 1.0)
}

/// Importance-weighted estimate: `c / q(chosen)` on the played arm, zero elsewhere.
pub fn fake_costs(chosen: usize, c: f64, q: &[f64]) -> Result<Vec<f64>> {
    let support = *q
        .get(chosen)
        .ok_or_else(|| Error::Invariant(format!("arm {chosen} outside distribution of {} arms", q.len())))?;
    if !(support > 0.0) {
        return Err(Error::Invariant(format!("chosen arm {chosen} has zero probability")));
    }
    let mut out = vec![0.0; q.len()];
    out[chosen] = c / support;
    Ok(out)
}

/// `w(pi) <- w(pi) * (1 - eps)^(fake cost of pi's arm at x)`.
pub fn update_weights(w: &mut WeightTable, fake: &[f64], policies: &[Policy], x: &Context) -> Result<()> {
    update_weights_from(w, fake, &predictions(policies, x)?)
}

pub(crate) fn update_weights_from(w: &mut WeightTable, fake: &[f64], chosen: &BTreeMap<PolicyId, usize>) -> Result<()> {
    let base = 1.0 - w.eps_update;
    for (id, weight) in w.weights.iter_mut() {
        let arm = *chosen
            .get(id)
            .ok_or_else(|| Error::Invariant(format!("no prediction for policy {id}")))?;
        let c = fake.get(arm).copied().unwrap_or(0.0);
        *weight *= base.powf(c);
    }
    let max = w.weights.values().copied().fold(0.0, f64::max);
    if max < RESCALE_BELOW {
        for v in w.weights.values_mut() {
            *v /= max;
        }
    }
    for v in w.weights.values_mut() {
        *v = v.max(f64::MIN_POSITIVE);
    }
    Ok(())
}

/// Draw an index from a discrete distribution by inverse CDF.
pub(crate) fn sample_index<R: Rng>(probs: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}
