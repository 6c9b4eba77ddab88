use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feature::Feature;
use super::identity::IdentityId;
use crate::{Error, Result};

/// Threshold separating genuine from impostor similarities.
///
/// Separated lists give the midpoint of the gap. Otherwise the candidate
/// with the fewest misclassifications wins (a similarity `s` counts as a
/// match when `s > t`), ties going to the lower threshold. Candidates are the
/// midpoints between consecutive distinct observed values plus one point
/// just below and one at the observed extremes.
pub fn calibrate_threshold(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("calibration needs at least one positive and one negative similarity"));
    }
    if positives.iter().chain(negatives).any(|v| !v.is_finite()) {
        return Err(Error::invalid("similarities must be finite"));
    }
    let min_pos = positives.iter().copied().fold(f64::INFINITY, f64::min);
    let max_neg = negatives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min_pos > max_neg {
        return Ok(0.5 * (min_pos + max_neg));
    }
    let mut values: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates = vec![values[0].next_down()];
    candidates.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(values[values.len() - 1]);
    let mut best = (usize::MAX, candidates[0]);
    for t in candidates {
        let e = misclassified(positives, negatives, t);
        if e < best.0 {
            best = (e, t);
        }
    }
    Ok(best.1)
}

/// Positives at or below `t` plus negatives above it.
pub fn misclassified(positives: &[f64], negatives: &[f64], t: f64) -> usize {
    positives.iter().filter(|&&p| p <= t).count() + negatives.iter().filter(|&&n| n > t).count()
}

/// Which gallery entries are ignored when ranking for a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunkRule {
    /// Everything captured by the query's camera.
    Conventional,
    /// Only entries from the query's own frame.
    Framejunk,
}

impl JunkRule {
    pub fn is_junk(self, query: &Feature, entry: &Feature) -> bool {
        match self {
            JunkRule::Conventional => entry.camera() == query.camera(),
            JunkRule::Framejunk => entry.frame() == query.frame(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeature {
    pub feature: Feature,
    pub identity: IdentityId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmcReport {
    /// `cmc[k - 1]` is the fraction of evaluated queries matched within rank k.
    pub cmc: Vec<f64>,
    pub map: f64,
    pub evaluated: usize,
    /// Queries without any valid true match, left out of both metrics.
    pub excluded: usize,
}

impl CmcReport {
    pub fn rank(&self, k: usize) -> f64 {
        self.cmc.get(k.saturating_sub(1)).copied().unwrap_or(0.0)
    }
}

/// One-based ranks of the true matches, or `None` when there are none.
fn match_ranks(query: &LabeledFeature, gallery: &[LabeledFeature], rule: JunkRule) -> Result<Option<Vec<usize>>> {
    let mut scored = Vec::with_capacity(gallery.len());
    for (i, g) in gallery.iter().enumerate() {
        if rule.is_junk(&query.feature, &g.feature) {
            continue;
        }
        scored.push((query.feature.similarity(&g.feature)?, i));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let ranks: Vec<usize> = scored
        .iter()
        .enumerate()
        .filter(|(_, (_, i))| gallery[*i].identity == query.identity)
        .map(|(r, _)| r + 1)
        .collect();
    Ok((!ranks.is_empty()).then_some(ranks))
}

/// CMC curve up to `max_rank` and mean average precision.
pub fn cmc_map(queries: &[LabeledFeature], gallery: &[LabeledFeature], rule: JunkRule, max_rank: usize) -> Result<CmcReport> {
    let per_query: Vec<Option<Vec<usize>>> = queries
        .par_iter()
        .map(|q| match_ranks(q, gallery, rule))
        .collect::<Result<_>>()?;
    let mut hits = vec![0usize; max_rank];
    let mut ap_sum = 0.0;
    let mut evaluated = 0;
    for ranks in per_query.iter().flatten() {
        evaluated += 1;
        let first = ranks[0];
        for h in hits.iter_mut().skip(first - 1) {
            *h += 1;
        }
        ap_sum += ranks.iter().enumerate().map(|(j, &r)| (j + 1) as f64 / r as f64).sum::<f64>() / ranks.len() as f64;
    }
    let denom = evaluated.max(1) as f64;
    Ok(CmcReport {
        cmc: hits.into_iter().map(|h| h as f64 / denom).collect(),
        map: ap_sum / denom,
        evaluated,
        excluded: queries.len() - evaluated,
    })
}
