//! Policy generation: mine the memory for each context's cheapest arm, then
//! fit a class-weighted linear softmax classifier mapping contexts to arms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context_model::{discretize_flat, Context, LevelBounds, Memory};
use crate::{rng, Error, Result};

pub type PolicyId = u64;

/// Training strategy `S`: full-batch gradient descent settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingStrategy {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainingStrategy {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
        }
    }
}

/// One `(sigma, S)` pair handed to the generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyStrategy {
    /// Scale of the arm class weights `exp(-rho / sigma^2)`.
    pub sigma: f64,
    #[serde(flatten)]
    pub training: TrainingStrategy,
}

impl Default for PolicyStrategy {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            training: TrainingStrategy::default(),
        }
    }
}

/// `count` strategies cycling through a small grid of sigma and learning
/// rates; the first one is the plain default.
pub fn default_strategies(count: usize) -> Vec<PolicyStrategy> {
    const SIGMAS: [f64; 3] = [1.0, 0.5, 2.0];
    const RATES: [f64; 4] = [0.1, 0.3, 0.03, 1.0];
    (0..count)
        .map(|i| PolicyStrategy {
            sigma: SIGMAS[i % SIGMAS.len()],
            training: TrainingStrategy {
                learning_rate: RATES[i % RATES.len()],
                epochs: 500,
            },
        })
        .collect()
}

/// One training sample per distinct context, labeled with its cheapest arm.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledContexts {
    pub samples: Vec<(Context, usize)>,
    pub arm_count: usize,
    pub max_level: u16,
}

/// Labeled contexts plus per-arm class weights for one sigma.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDataset {
    pub samples: Vec<(Context, usize)>,
    /// Fraction of contexts whose best arm is `a`.
    pub rho: Vec<f64>,
    pub arm_weights: Vec<f64>,
    pub arm_count: usize,
    pub max_level: u16,
}

/// Best recorded arm for every distinct context in memory.
///
/// A (context, arm) pair is represented by its minimum recorded cost; ties
/// between arms go to the lowest arm index.
pub fn label_contexts(mem: &Memory, bounds: &LevelBounds, arm_count: usize) -> Result<LabeledContexts> {
    if mem.is_empty() {
        return Err(Error::invalid("cannot build a policy dataset from an empty memory"));
    }
    let mut best: BTreeMap<Context, Vec<f64>> = BTreeMap::new();
    for p in mem.iter() {
        if p.arm >= arm_count {
            return Err(Error::invalid(format!("memory references arm {} of {arm_count}", p.arm)));
        }
        let ctx = discretize_flat(&p.delays, bounds)?;
        let row = best.entry(ctx).or_insert_with(|| vec![f64::INFINITY; arm_count]);
        row[p.arm] = row[p.arm].min(p.cost);
    }
    let samples = best
        .into_iter()
        .map(|(ctx, costs)| {
            let mut label = 0;
            for (a, &c) in costs.iter().enumerate() {
                if c < costs[label] {
                    label = a;
                }
            }
            (ctx, label)
        })
        .collect();
    Ok(LabeledContexts {
        samples,
        arm_count,
        max_level: bounds.levels(),
    })
}

impl LabeledContexts {
    pub fn weighted(&self, sigma: f64) -> Result<PolicyDataset> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let mut rho = vec![0.0; self.arm_count];
        let n = self.samples.len() as f64;
        for (_, label) in &self.samples {
            rho[*label] += 1.0 / n;
        }
        let arm_weights = rho.iter().map(|r| (-r / (sigma * sigma)).exp()).collect();
        Ok(PolicyDataset {
            samples: self.samples.clone(),
            rho,
            arm_weights,
            arm_count: self.arm_count,
            max_level: self.max_level,
        })
    }
}

pub fn build_dataset(mem: &Memory, bounds: &LevelBounds, arm_count: usize, sigma: f64) -> Result<PolicyDataset> {
    label_contexts(mem, bounds, arm_count)?.weighted(sigma)
}

/// A linear softmax classifier from context features to arms.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    id: PolicyId,
    arms: usize,
    features: usize,
    max_level: u16,
    /// Row-major `arms x features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    strategy: PolicyStrategy,
}

impl Policy {
    /// A policy from explicit parameters.
    pub fn from_parameters(
        id: PolicyId,
        arms: usize,
        features: usize,
        max_level: u16,
        weights: Vec<f64>,
        bias: Vec<f64>,
        strategy: PolicyStrategy,
    ) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("a policy needs at least one arm"));
        }
        if weights.len() != arms * features {
            return Err(Error::Dimension {
                expected: arms * features,
                actual: weights.len(),
            });
        }
        if bias.len() != arms {
            return Err(Error::Dimension {
                expected: arms,
                actual: bias.len(),
            });
        }
        Ok(Self {
            id,
            arms,
            features,
            max_level,
            weights,
            bias,
            strategy,
        })
    }

    pub fn id(&self) -> PolicyId {
        self.id
    }

    pub fn arm_count(&self) -> usize {
        self.arms
    }

    pub fn feature_len(&self) -> usize {
        self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn strategy(&self) -> &PolicyStrategy {
        &self.strategy
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.features {
            return Err(Error::Dimension {
                expected: self.features,
                actual: features.len(),
            });
        }
        Ok(logits(&self.weights, &self.bias, features))
    }

    /// Arm with the highest softmax score; ties go to the lowest index.
    pub fn predict(&self, ctx: &Context) -> Result<usize> {
        let z = self.logits(&ctx.features(self.max_level))?;
        Ok(argmax(&z))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("moddist-policy v1\n");
        let _ = writeln!(s, "id {}", self.id);
        let _ = writeln!(s, "features {}", self.features);
        let _ = writeln!(s, "arms {}", self.arms);
        let _ = writeln!(s, "levels {}", self.max_level);
        let _ = writeln!(s, "sigma {}", self.strategy.sigma);
        let _ = writeln!(s, "learning_rate {}", self.strategy.training.learning_rate);
        let _ = writeln!(s, "epochs {}", self.strategy.training.epochs);
        for a in 0..self.arms {
            s.push_str("row");
            for w in &self.weights[a * self.features..(a + 1) * self.features] {
                let _ = write!(s, " {w}");
            }
            let _ = writeln!(s, " {}", self.bias[a]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("policy text: {what}"));
        let mut lines = text.lines();
        if lines.next() != Some("moddist-policy v1") {
            return Err(bad("missing `moddist-policy v1` header"));
        }
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        for line in lines {
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("row") => rows.push(
                    toks.map(|t| t.parse::<f64>().map_err(|_| bad(line)))
                        .collect::<Result<Vec<_>>>()?,
                ),
                Some(key) => {
                    let v = toks.next().ok_or_else(|| bad(line))?;
                    header.insert(key.to_string(), v.to_string());
                }
                None => {}
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing `{k}`")));
        let parse_usize = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(k)) };
        let parse_f64 = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(k)) };
        let features = parse_usize("features")?;
        let arms = parse_usize("arms")?;
        if rows.len() != arms || rows.iter().any(|r| r.len() != features + 1) {
            return Err(bad("parameter rows do not match dimensions"));
        }
        let mut weights = Vec::with_capacity(arms * features);
        let mut bias = Vec::with_capacity(arms);
        for r in rows {
            weights.extend_from_slice(&r[..features]);
            bias.push(r[features]);
        }
        Policy::from_parameters(
            get("id")?.parse().map_err(|_| bad("id"))?,
            arms,
            features,
            get("levels")?.parse().map_err(|_| bad("levels"))?,
            weights,
            bias,
            PolicyStrategy {
                sigma: parse_f64("sigma")?,
                training: TrainingStrategy {
                    learning_rate: parse_f64("learning_rate")?,
                    epochs: parse_usize("epochs")?,
                },
            },
        )
    }
}

fn logits(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let f = x.len();
    bias.iter()
        .enumerate()
        .map(|(a, b)| b + weights[a * f..(a + 1) * f].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Encoded training problem: feature rows, labels and per-sample weights.
pub(crate) struct Problem {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub sample_weights: Vec<f64>,
    pub arms: usize,
}

impl Problem {
    pub fn from_dataset(ds: &PolicyDataset) -> Self {
        Self {
            features: ds.samples.iter().map(|(c, _)| c.features(ds.max_level)).collect(),
            labels: ds.samples.iter().map(|(_, l)| *l).collect(),
            sample_weights: ds.samples.iter().map(|(_, l)| ds.arm_weights[*l]).collect(),
            arms: ds.arm_count,
        }
    }

    /// Mean class-weighted cross-entropy and its gradient w.r.t. `(weights, bias)`.
    pub fn loss_and_gradient(&self, weights: &[f64], bias: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.features.len() as f64;
        let f = weights.len() / self.arms;
        let mut gw = vec![0.0; weights.len()];
        let mut gb = vec![0.0; bias.len()];
        let mut loss = 0.0;
        for ((x, &y), &sw) in self.features.iter().zip(&self.labels).zip(&self.sample_weights) {
            let mut p = logits(weights, bias, x);
            let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + p.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += sw * (lse - p[y]) / n;
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            for (a, g) in p.iter().enumerate() {
                let g = sw * g / n;
                gb[a] += g;
                for (gwv, xv) in gw[a * f..(a + 1) * f].iter_mut().zip(x) {
                    *gwv += g * xv;
                }
            }
        }
        (loss, gw, gb)
    }
}

/// Full-batch gradient descent on the class-weighted softmax loss.
pub fn train_policy(ds: &PolicyDataset, strategy: PolicyStrategy, seed: u64, id: PolicyId) -> Result<Policy> {
    if ds.samples.is_empty() {
        return Err(Error::invalid("policy dataset is empty"));
    }
    let lr = strategy.training.learning_rate;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    if strategy.training.epochs == 0 {
        return Err(Error::invalid("epoch count must be at least 1"));
    }
    let problem = Problem::from_dataset(ds);
    let features = problem.features[0].len();
    let arms = ds.arm_count;

    let mut r = rng::stream(seed, 0x7EA1);
    let mut weights: Vec<f64> = (0..arms * features).map(|_| r.random_range(-0.01..0.01)).collect();
    let mut bias = vec![0.0; arms];
    for _ in 0..strategy.training.epochs {
        let (loss, gw, gb) = problem.loss_and_gradient(&weights, &bias);
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss {loss}")));
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= lr * g;
        }
        for (b, g) in bias.iter_mut().zip(&gb) {
            *b -= lr * g;
        }
    }
    if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
        return Err(Error::Training("parameters diverged".into()));
    }
    Policy::from_parameters(id, arms, features, ds.max_level, weights, bias, strategy)
}

/// Train one policy per strategy, each with its own sigma. Ids are
/// `first_id, first_id + 1, ...` in strategy order.
pub fn generate_policies(
    mem: &Memory,
    bounds: &LevelBounds,
    arm_count: usize,
    strategies: &[PolicyStrategy],
    seed: u64,
    first_id: PolicyId,
) -> Result<Vec<Policy>> {
    if strategies.is_empty() {
        return Err(Error::invalid("at least one strategy is required"));
    }
    let labeled = label_contexts(mem, bounds, arm_count)?;
    strategies
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let ds = labeled.weighted(s.sigma)?;
            train_policy(&ds, *s, rng::derive(seed, i as u64), first_id + i as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::context_model::{all_contexts, DataPoint};

    fn bounds(entities: usize, levels: u16) -> LevelBounds {
        LevelBounds::new(vec![0.0; entities], vec![f64::from(levels); entities], levels).unwrap()
    }

    /// A delay sitting in the middle of `level`.
    fn delay_at(level: u16) -> f64 {
        f64::from(level) - 0.5
    }

    fn mem_from(points: &[(Vec<u16>, usize, f64)], entities: usize) -> Memory {
        let mut m = Memory::new(1000, entities).unwrap();
        for (i, (levels, arm, cost)) in points.iter().enumerate() {
            m.push(DataPoint {
                slot: i as u64,
                delays: levels.iter().map(|&l| delay_at(l)).collect(),
                arm: *arm,
                cost: *cost,
            })
            .unwrap();
        }
        m
    }

    #[test]
    fn label_is_direct_argmin() {
        let mem = mem_from(&[(vec![1], 0, 0.3), (vec![1], 1, 0.2)], 1);
        let ds = build_dataset(&mem, &bounds(1, 2), 2, 1.0).unwrap();
        assert_eq!(ds.samples.len(), 1);
        assert_eq!(ds.samples[0].1, 1);
    }

    #[test]
    fn repeated_pairs_use_their_minimum_cost() {
        let mem = mem_from(&[(vec![1], 0, 0.9), (vec![1], 1, 0.2), (vec![1], 0, 0.1)], 1);
        let ds = build_dataset(&mem, &bounds(1, 2), 2, 1.0).unwrap();
        assert_eq!(ds.samples[0].1, 0);
    }

    #[test]
    fn arm_weights_follow_rho() {
        let mem = mem_from(&[(vec![1], 1, 0.3), (vec![2], 1, 0.2)], 1);
        let sigma: f64 = 0.8;
        let ds = build_dataset(&mem, &bounds(1, 2), 3, sigma).unwrap();
        assert_eq!(ds.rho, vec![0.0, 1.0, 0.0]);
        assert!((ds.arm_weights[1] - (-1.0 / (sigma * sigma)).exp()).abs() < 1e-15);
        assert_eq!(ds.arm_weights[0], 1.0);
        assert_eq!(ds.arm_weights[2], 1.0);
        assert!(build_dataset(&Memory::new(3, 1).unwrap(), &bounds(1, 2), 3, 1.0).is_err());
    }

    #[test]
    fn separable_pair_is_learned() {
        let mem = mem_from(&[(vec![1], 0, 1.0), (vec![1], 1, 2.0), (vec![2], 1, 1.0), (vec![2], 0, 2.0)], 1);
        let ds = build_dataset(&mem, &bounds(1, 2), 2, 1.0).unwrap();
        let strategy = PolicyStrategy {
            sigma: 1.0,
            training: TrainingStrategy {
                learning_rate: 0.1,
                epochs: 200,
            },
        };
        let p = train_policy(&ds, strategy, 1, 0).unwrap();
        for (ctx, label) in &ds.samples {
            assert_eq!(p.predict(ctx).unwrap(), *label);
        }
    }

    #[test]
    fn single_class_always_predicted() {
        let mem = mem_from(&[(vec![1, 2], 0, 1.0)], 2);
        let ds = build_dataset(&mem, &bounds(2, 3), 1, 1.0).unwrap();
        let p = train_policy(&ds, PolicyStrategy::default(), 3, 0).unwrap();
        for ctx in all_contexts(3, 2) {
            assert_eq!(p.predict(&ctx).unwrap(), 0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mem = mem_from(&[(vec![1, 1], 0, 1.0), (vec![2, 1], 1, 1.0), (vec![1, 2], 2, 1.0)], 2);
        let ds = build_dataset(&mem, &bounds(2, 2), 3, 1.0).unwrap();
        let a = train_policy(&ds, PolicyStrategy::default(), 77, 0).unwrap();
        let b = train_policy(&ds, PolicyStrategy::default(), 77, 0).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.bias(), b.bias());
    }

    #[test]
    fn training_rejects_bad_strategy() {
        let mem = mem_from(&[(vec![1], 0, 1.0)], 1);
        let ds = build_dataset(&mem, &bounds(1, 2), 2, 1.0).unwrap();
        let mut s = PolicyStrategy::default();
        s.training.learning_rate = 0.0;
        assert!(train_policy(&ds, s, 0, 0).is_err());
        s.training = TrainingStrategy {
            learning_rate: f64::INFINITY,
            epochs: 10,
        };
        assert!(train_policy(&ds, s, 0, 0).is_err());
    }

    #[test]
    fn predict_ties_and_shift_invariance() {
        let zero = Policy::from_parameters(0, 4, 2, 3, vec![0.0; 8], vec![0.0; 4], PolicyStrategy::default()).unwrap();
        let ctx = Context::new(vec![2, 3], 3).unwrap();
        assert_eq!(zero.predict(&ctx).unwrap(), 0);

        let w = vec![0.5, -1.0, 2.0, 0.1, -0.3, 0.7];
        let p = Policy::from_parameters(0, 3, 2, 3, w.clone(), vec![0.0, 0.2, -0.1], PolicyStrategy::default()).unwrap();
        let shifted = Policy::from_parameters(0, 3, 2, 3, w, vec![5.0, 5.2, 4.9], PolicyStrategy::default()).unwrap();
        for ctx in all_contexts(3, 2) {
            assert_eq!(p.predict(&ctx).unwrap(), shifted.predict(&ctx).unwrap());
        }
        let short = Context::new(vec![1], 3).unwrap();
        assert!(matches!(p.predict(&short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn memorizes_training_point() {
        let mem = mem_from(&[(vec![2, 1], 2, 0.1), (vec![2, 1], 0, 0.4), (vec![1, 1], 0, 0.1)], 2);
        let ds = build_dataset(&mem, &bounds(2, 2), 3, 1.0).unwrap();
        let p = train_policy(&ds, PolicyStrategy::default(), 5, 0).unwrap();
        assert_eq!(p.predict(&Context::new(vec![2, 1], 2).unwrap()).unwrap(), 2);
    }

    fn noisy_memory() -> Memory {
        let mut pts = Vec::new();
        let mut r = rng::stream(4, 4);
        for i in 0..200 {
            let levels = vec![r.random_range(1..=3u16), r.random_range(1..=3u16)];
            let arm = r.random_range(0..3usize);
            pts.push((levels, arm, (i % 7) as f64 + r.random::<f64>()));
        }
        mem_from(&pts, 2)
    }

    #[test]
    fn strategies_yield_distinct_policies() {
        let mem = noisy_memory();
        let b = bounds(2, 3);
        let strategies = default_strategies(3);
        let ps = generate_policies(&mem, &b, 3, &strategies, 9, 10).unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps.iter().map(Policy::id).collect::<Vec<_>>(), vec![10, 11, 12]);
        assert_ne!(ps[0].weights(), ps[1].weights());
        assert_ne!(ps[1].weights(), ps[2].weights());
        assert_ne!(ps[0].weights(), ps[2].weights());
        let one = generate_policies(&mem, &b, 3, &strategies[..1], 9, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!(generate_policies(&mem, &b, 3, &[], 9, 0).is_err());
    }

    #[test]
    fn covered_space_policies_reproduce_argmin_labels() {
        // Arm costs are affine in the levels, so the argmin map is linearly separable.
        let cost = |levels: &[u16], arm: usize| -> f64 {
            let (a, b) = (f64::from(levels[0]), f64::from(levels[1]));
            [3.0 * a, 1.0 + 3.0 * b, 4.5 + 0.5 * a][arm]
        };
        let mut pts = Vec::new();
        for ctx in all_contexts(3, 2) {
            for arm in 0..3 {
                pts.push((ctx.levels().to_vec(), arm, cost(ctx.levels(), arm)));
            }
        }
        let mem = mem_from(&pts, 2);
        let b = bounds(2, 3);
        let strategies: Vec<_> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&lr| PolicyStrategy {
                sigma: 1.0,
                training: TrainingStrategy {
                    learning_rate: lr,
                    epochs: 5000,
                },
            })
            .collect();
        let labeled = label_contexts(&mem, &b, 3).unwrap();
        let ps = generate_policies(&mem, &b, 3, &strategies, 2, 0).unwrap();
        for p in &ps {
            for (ctx, label) in &labeled.samples {
                assert_eq!(p.predict(ctx).unwrap(), *label, "policy {} context {:?}", p.id(), ctx);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mem = noisy_memory();
        let p = generate_policies(&mem, &bounds(2, 3), 3, &default_strategies(1), 1, 42).unwrap().remove(0);
        let back = Policy::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert!(Policy::from_text("nope").is_err());
    }

    #[test]
    fn label_optimality() {
        let mem = noisy_memory();
        let b = bounds(2, 3);
        let labeled = label_contexts(&mem, &b, 3).unwrap();
        for (ctx, label) in &labeled.samples {
            let best_label = mem
                .iter()
                .filter(|p| discretize_flat(&p.delays, &b).unwrap() == *ctx && p.arm == *label)
                .map(|p| p.cost)
                .fold(f64::INFINITY, f64::min);
            for p in mem.iter().filter(|p| discretize_flat(&p.delays, &b).unwrap() == *ctx) {
                assert!(p.cost >= best_label);
            }
        }
    }

    #[test]
    fn prediction_is_total() {
        let mem = noisy_memory();
        let ps = generate_policies(&mem, &bounds(2, 3), 3, &default_strategies(2), 1, 0).unwrap();
        for p in &ps {
            for ctx in all_contexts(3, 2) {
                assert!(p.predict(&ctx).unwrap() < 3);
            }
        }
    }

    fn central_difference(problem: &Problem, w: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = 1e-6;
        let eval = |w: &[f64], b: &[f64]| {
            // Independent re-statement of the weighted cross-entropy.
            let n = problem.features.len() as f64;
            let f = problem.features[0].len();
            let mut total = 0.0;
            for ((x, &y), &sw) in problem.features.iter().zip(&problem.labels).zip(&problem.sample_weights) {
                let z: Vec<f64> = (0..problem.arms)
                    .map(|a| b[a] + (0..f).map(|j| w[a * f + j] * x[j]).sum::<f64>())
                    .collect();
                let denom: f64 = z.iter().map(|v| v.exp()).sum();
                total += -sw * (z[y].exp() / denom).ln();
            }
            total / n
        };
        let mut gw = vec![0.0; w.len()];
        for i in 0..w.len() {
            let (mut up, mut dn) = (w.to_vec(), w.to_vec());
            up[i] += h;
            dn[i] -= h;
            gw[i] = (eval(&up, b) - eval(&dn, b)) / (2.0 * h);
        }
        let mut gb = vec![0.0; b.len()];
        for i in 0..b.len() {
            let (mut up, mut dn) = (b.to_vec(), b.to_vec());
            up[i] += h;
            dn[i] -= h;
            gb[i] = (eval(w, &up) - eval(w, &dn)) / (2.0 * h);
        }
        (gw, gb)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000, arms in 2usize..5, n in 1usize..8) {
            let mut r = rng::stream(seed, 1);
            let f = 3;
            let problem = Problem {
                features: (0..n).map(|_| (0..f).map(|_| r.random::<f64>()).collect()).collect(),
                labels: (0..n).map(|_| r.random_range(0..arms)).collect(),
                sample_weights: (0..n).map(|_| r.random_range(0.1..1.0)).collect(),
                arms,
            };
            let w: Vec<f64> = (0..arms * f).map(|_| r.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..arms).map(|_| r.random_range(-1.0..1.0)).collect();
            let (_, gw, gb) = problem.loss_and_gradient(&w, &b);
            let (nw, nb) = central_difference(&problem, &w, &b);
            for (a, e) in gw.iter().chain(&gb).zip(nw.iter().chain(&nb)) {
                let rel = (a - e).abs() / a.abs().max(e.abs()).max(1e-3);
                prop_assert!(rel < 1e-5, "analytic {a} numeric {e}");
            }
        }
    }
}
