//! Data collection, delay-level discretization and the bounded data memory.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::mec_sim::{Simulator, SlotObservation};
use crate::{rng, Error, Result};

pub const DEFAULT_MEMORY_CAPACITY: usize = 100_000;

/// Per-entity delay range and the number of levels it is split into.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelBounds {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    levels: u16,
}

impl LevelBounds {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, levels: u16) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("level count L must be at least 1"));
        }
        if mins.len() != maxs.len() {
            return Err(Error::Dimension {
                expected: mins.len(),
                actual: maxs.len(),
            });
        }
        if let Some(i) = mins.iter().zip(&maxs).position(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::invalid(format!("entity {i}: d_min > d_max")));
        }
        Ok(Self { mins, maxs, levels })
    }

    pub fn levels(&self) -> u16 {
        self.levels
    }

    pub fn entity_count(&self) -> usize {
        self.mins.len()
    }

    pub fn range(&self, entity: usize) -> (f64, f64) {
        (self.mins[entity], self.maxs[entity])
    }

    /// Level in `1..=L` of `delay` for `entity`; out-of-range values clamp.
    pub fn level_of(&self, entity: usize, delay: f64) -> u16 {
        let (lo, hi) = (self.mins[entity], self.maxs[entity]);
        let width = (hi - lo) / f64::from(self.levels);
        if !(width > 0.0) || delay.is_nan() {
            return 1;
        }
        let raw = ((delay - lo) / width).floor();
        if raw < 0.0 {
            1
        } else if raw >= f64::from(self.levels) {
            self.levels
        } else {
            raw as u16 + 1
        }
    }
}

/// Discretized delay levels, servers first then links, each in `1..=L`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    levels: Vec<u16>,
}

impl Context {
    pub fn new(levels: Vec<u16>, max_level: u16) -> Result<Self> {
        if let Some(&bad) = levels.iter().find(|&&l| l == 0 || l > max_level) {
            return Err(Error::invalid(format!("level {bad} outside [1, {max_level}]")));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Levels mapped to `[0, 1]`: `(level - 1) / (L - 1)`, zero when `L = 1`.
    pub fn features(&self, max_level: u16) -> Vec<f64> {
        let denom = f64::from(max_level.saturating_sub(1));
        self.levels
            .iter()
            .map(|&l| if denom > 0.0 { f64::from(l - 1) / denom } else { 0.0 })
            .collect()
    }
}

/// Number of distinct contexts, `L^(entities)`, if it fits in a `u128`.
pub fn context_space_size(levels: u16, entities: usize) -> Option<u128> {
    u128::from(levels).checked_pow(u32::try_from(entities).ok()?)
}

/// Every context of a (tiny) context space, in lexicographic order.
pub fn all_contexts(levels: u16, entities: usize) -> impl Iterator<Item = Context> {
    let total = context_space_size(levels, entities).expect("context space too large to enumerate");
    (0..total).map(move |mut code| {
        let mut v = vec![1u16; entities];
        for slot in v.iter_mut().rev() {
            *slot = (code % u128::from(levels)) as u16 + 1;
            code /= u128::from(levels);
        }
        Context { levels: v }
    })
}

pub fn discretize(obs: &SlotObservation, bounds: &LevelBounds) -> Result<Context> {
    discretize_flat(&obs.to_vec(), bounds)
}

pub fn discretize_flat(delays: &[f64], bounds: &LevelBounds) -> Result<Context> {
    if delays.len() != bounds.entity_count() {
        return Err(Error::Dimension {
            expected: bounds.entity_count(),
            actual: delays.len(),
        });
    }
    Ok(Context {
        levels: delays.iter().enumerate().map(|(i, &d)| bounds.level_of(i, d)).collect(),
    })
}

/// One recorded round: what was observed, which arm was played, what it cost.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub slot: u64,
    pub delays: Vec<f64>,
    pub arm: usize,
    /// Raw cost in ms.
    pub cost: f64,
}

/// Bounded FIFO of data points with O(1) amortized running cost extrema.
#[derive(Clone, Debug)]
pub struct Memory {
    capacity: usize,
    entities: usize,
    entries: VecDeque<DataPoint>,
    // Sequence number of entries.front().
    head: u64,
    // Monotone queues of (sequence, cost) for the window minimum / maximum.
    min_q: VecDeque<(u64, f64)>,
    max_q: VecDeque<(u64, f64)>,
}

impl Memory {
    pub fn new(capacity: usize, entities: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("memory capacity must be positive"));
        }
        Ok(Self {
            capacity,
            entities,
            entries: VecDeque::new(),
            head: 0,
            min_q: VecDeque::new(),
            max_q: VecDeque::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entity_count(&self) -> usize {
        self.entities
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataPoint> {
        self.entries.iter()
    }

    pub fn push(&mut self, point: DataPoint) -> Result<()> {
        if point.delays.len() != self.entities {
            return Err(Error::Dimension {
                expected: self.entities,
                actual: point.delays.len(),
            });
        }
        if !point.cost.is_finite() {
            return Err(Error::invalid("data point cost must be finite"));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            let evicted = self.head;
            self.head += 1;
            if self.min_q.front().is_some_and(|&(s, _)| s == evicted) {
                self.min_q.pop_front();
            }
            if self.max_q.front().is_some_and(|&(s, _)| s == evicted) {
                self.max_q.pop_front();
            }
        }
        let seq = self.head + self.entries.len() as u64;
        while self.min_q.back().is_some_and(|&(_, c)| c >= point.cost) {
            self.min_q.pop_back();
        }
        self.min_q.push_back((seq, point.cost));
        while self.max_q.back().is_some_and(|&(_, c)| c <= point.cost) {
            self.max_q.pop_back();
        }
        self.max_q.push_back((seq, point.cost));
        self.entries.push_back(point);
        Ok(())
    }

    /// `(c_min, c_max)` over the stored entries.
    pub fn cost_range(&self) -> Option<(f64, f64)> {
        Some((self.min_q.front()?.1, self.max_q.front()?.1))
    }

    /// Serialize as a line-oriented log: a header, then
    /// `slot,delay_1,...,delay_n,arm,cost` per data point.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# moddist-memory v1 entities={} capacity={}", self.entities, self.capacity)?;
        let mut line = String::new();
        for p in &self.entries {
            line.clear();
            write!(line, "{}", p.slot).unwrap();
            for d in &p.delays {
                write!(line, ",{d}").unwrap();
            }
            write!(line, ",{},{}", p.arm, p.cost).unwrap();
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_log<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty memory log".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let field = |key: &str| -> Result<usize> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(key))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("memory log header lacks `{key}`")))
        };
        if !header.starts_with("# moddist-memory v1") {
            return Err(Error::Parse(format!("unsupported memory log header `{header}`")));
        }
        let mut mem = Memory::new(field("capacity=")?, field("entities=")?)?;
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("memory log line {}: `{line}`", n + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != mem.entities + 3 {
                return Err(bad());
            }
            let slot = cols[0].parse().map_err(|_| bad())?;
            let delays = cols[1..=mem.entities]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            let arm = cols[mem.entities + 1].parse().map_err(|_| bad())?;
            let cost = cols[mem.entities + 2].parse().map_err(|_| bad())?;
            mem.push(DataPoint { slot, delays, arm, cost })?;
        }
        Ok(mem)
    }
}

/// Fit per-entity `[d_min, d_max]` over every stored observation.
pub fn fit_bounds(mem: &Memory, levels: u16) -> Result<LevelBounds> {
    let first = mem.iter().next().ok_or_else(|| Error::invalid("cannot fit bounds on an empty memory"))?;
    let mut mins = first.delays.clone();
    let mut maxs = first.delays.clone();
    for p in mem.iter().skip(1) {
        for ((lo, hi), &d) in mins.iter_mut().zip(maxs.iter_mut()).zip(&p.delays) {
            *lo = lo.min(d);
            *hi = hi.max(d);
        }
    }
    LevelBounds::new(mins, maxs, levels)
}

/// Run `n` rounds of uniform-random placement on an unloaded network.
pub fn collect(sim: &Simulator, n: usize, seed: u64, capacity: usize) -> Result<Memory> {
    if n == 0 {
        return Err(Error::invalid("collection duration N must be at least 1"));
    }
    if n > capacity {
        return Err(Error::config(format!("N = {n} exceeds memory capacity {capacity}")));
    }
    let arms = sim.arms();
    if arms.is_empty() {
        return Err(Error::config("arm set is empty"));
    }
    let mut r = rng::stream(seed, 0xC011);
    let load = vec![0u32; sim.topology().server_count()];
    let mut mem = Memory::new(capacity, sim.topology().entity_count())?;
    for slot in 0..n as u64 {
        let obs = sim.sample_slot(slot);
        let arm = r.random_range(0..arms.len());
        let cost = sim.cost(&obs, arms[arm], &load)?;
        mem.push(DataPoint {
            slot,
            delays: obs.to_vec(),
            arm,
            cost,
        })?;
    }
    Ok(mem)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::mec_sim::{DelayDist, DelayModel, NetworkTopology};

    fn point(slot: u64, delays: Vec<f64>, cost: f64) -> DataPoint {
        DataPoint {
            slot,
            delays,
            arm: 0,
            cost,
        }
    }

    fn four_to_eight() -> LevelBounds {
        LevelBounds::new(vec![4.0], vec![8.0], 4).unwrap()
    }

    #[test]
    fn uniform_bins_match_hand_partition() {
        let b = four_to_eight();
        // [4,5) [5,6) [6,7) [7,8]
        let expect = [(4.0, 1), (4.99, 1), (5.0, 2), (6.0, 3), (6.5, 3), (7.0, 4), (8.0, 4)];
        for (d, l) in expect {
            assert_eq!(b.level_of(0, d), l, "delay {d}");
        }
    }

    #[test]
    fn fit_bounds_uses_extrema() {
        let mut mem = Memory::new(10, 1).unwrap();
        mem.push(point(0, vec![8.0], 1.0)).unwrap();
        mem.push(point(1, vec![4.0], 1.0)).unwrap();
        let b = fit_bounds(&mem, 4).unwrap();
        assert_eq!(b, four_to_eight());
        assert_eq!(fit_bounds(&mem, 4).unwrap(), b);
        assert!(fit_bounds(&Memory::new(3, 1).unwrap(), 4).is_err());
    }

    #[test]
    fn single_level_and_zero_width() {
        let b = LevelBounds::new(vec![4.0, 3.0], vec![8.0, 3.0], 1).unwrap();
        assert_eq!(b.level_of(0, 7.9), 1);
        let b = LevelBounds::new(vec![4.0, 3.0], vec![8.0, 3.0], 5).unwrap();
        assert_eq!(b.level_of(1, 3.0), 1);
        assert_eq!(b.level_of(1, 100.0), 1);
    }

    #[test]
    fn boundaries_and_missing_entity() {
        let b = four_to_eight();
        let ctx = discretize_flat(&[4.0], &b).unwrap();
        assert_eq!(ctx.levels(), &[1]);
        assert_eq!(discretize_flat(&[8.0], &b).unwrap().levels(), &[4]);
        assert!(matches!(discretize_flat(&[4.0, 5.0], &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn memory_evicts_oldest_and_tracks_extrema() {
        let mut mem = Memory::new(3, 1).unwrap();
        for (i, c) in [5.0, 1.0, 9.0, 4.0, 6.0].into_iter().enumerate() {
            mem.push(point(i as u64, vec![1.0], c)).unwrap();
        }
        assert_eq!(mem.len(), 3);
        assert_eq!(mem.iter().map(|p| p.slot).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(mem.cost_range(), Some((4.0, 9.0)));
        mem.push(point(5, vec![1.0], 7.0)).unwrap();
        assert_eq!(mem.cost_range(), Some((4.0, 7.0)));
    }

    #[test]
    fn log_round_trip() {
        let mut mem = Memory::new(8, 2).unwrap();
        mem.push(DataPoint {
            slot: 3,
            delays: vec![0.1 + 0.2, 1e-3],
            arm: 2,
            cost: 12.345678901234567,
        })
        .unwrap();
        let mut buf = Vec::new();
        mem.write_log(&mut buf).unwrap();
        let back = Memory::read_log(buf.as_slice()).unwrap();
        assert_eq!(back.iter().collect::<Vec<_>>(), mem.iter().collect::<Vec<_>>());
        assert_eq!(back.capacity(), 8);
        assert!(Memory::read_log("garbage\n".as_bytes()).is_err());
    }

    fn sim(dist: DelayDist) -> Simulator {
        let t = NetworkTopology::new(
            ["c0"],
            ["s0", "s1", "s2"],
            [("e0", "c0", "s0"), ("e1", "c0", "s1"), ("e2", "c0", "s2"), ("e3", "s1", "s2")],
        )
        .unwrap();
        let m = DelayModel::uniform(&t, dist);
        Simulator::new(t, m, 9).unwrap()
    }

    #[test]
    fn collect_picks_arms_uniformly() {
        let s = sim(DelayDist::LogNormal { mu: 2.0, sigma: 0.3 });
        let k = s.arms().len();
        let mem = collect(&s, k * 1000, 5, DEFAULT_MEMORY_CAPACITY).unwrap();
        let mut counts = vec![0usize; k];
        for p in mem.iter() {
            counts[p.arm] += 1;
        }
        for c in counts {
            let freq = c as f64 / (k * 1000) as f64;
            assert!((freq - 1.0 / k as f64).abs() < 0.1 / k as f64, "freq {freq}");
        }
    }

    #[test]
    fn collect_edge_cases() {
        let s = sim(DelayDist::Constant { ms: 10.0 });
        assert_eq!(collect(&s, 1, 0, 10).unwrap().len(), 1);
        assert!(matches!(collect(&s, 11, 0, 10), Err(Error::Config(_))));
        let mem = collect(&s, 50, 0, 100).unwrap();
        assert!(mem.iter().all(|p| p.cost == 20.0));
    }

    #[test]
    fn context_space_is_enumerable() {
        let all: Vec<_> = all_contexts(3, 2).collect();
        assert_eq!(all.len() as u128, context_space_size(3, 2).unwrap());
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 9);
        // Every enumerated context is reachable by discretizing some delay vector.
        let b = LevelBounds::new(vec![0.0, 0.0], vec![3.0, 3.0], 3).unwrap();
        let mut reached = std::collections::BTreeSet::new();
        for a in 0..3 {
            for c in 0..3 {
                reached.insert(discretize_flat(&[a as f64 + 0.5, c as f64 + 0.5], &b).unwrap());
            }
        }
        assert_eq!(reached.into_iter().collect::<Vec<_>>(), all);
    }

    proptest! {
        #[test]
        fn discretize_always_clamps(lo in -1e3f64..1e3, width in 0.0f64..1e3, d in -1e6f64..1e6, levels in 1u16..20) {
            let b = LevelBounds::new(vec![lo], vec![lo + width], levels).unwrap();
            let l = b.level_of(0, d);
            prop_assert!((1..=levels).contains(&l));
        }

        #[test]
        fn cost_range_matches_scan(costs in proptest::collection::vec(0.0f64..100.0, 1..60), cap in 1usize..20) {
            let mut mem = Memory::new(cap, 1).unwrap();
            for (i, c) in costs.iter().enumerate() {
                mem.push(point(i as u64, vec![0.0], *c)).unwrap();
            }
            let lo = mem.iter().map(|p| p.cost).fold(f64::INFINITY, f64::min);
            let hi = mem.iter().map(|p| p.cost).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(mem.cost_range(), Some((lo, hi)));
        }
    }
}
