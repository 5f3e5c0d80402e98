//! Rarity-of-events intrinsic reward.
//!
//! Episode event vectors land in a FIFO window ([`EventBuffer`]); the reward
//! for a step's events is the sum over events of `count / max(mean, tau)`,
//! where `mean` is the windowed episodic mean occurrence. An event that
//! occurs exactly as often as its mean earns a total of 1 per episode, so in
//! that sense all events carry equal weight; events never seen before pay the
//! maximum `1/tau` per occurrence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventTaxonomy, EventVector};

/// Reward parameters: mean-clipping threshold and window capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoeConfig {
    /// Lower clipping threshold for the mean; `1/tau` is the maximum reward
    /// per occurrence (100 at the default 0.01).
    pub tau: f64,
    /// Window size N: number of recent episodes the mean is taken over.
    pub buffer_capacity: usize,
}

impl Default for RoeConfig {
    fn default() -> Self {
        RoeConfig {
            tau: 0.01,
            buffer_capacity: 100,
        }
    }
}

impl RoeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.buffer_capacity < 1 {
            return Err(Error::config("buffer_capacity must be >= 1"));
        }
        Ok(())
    }
}

/// Sliding window of the last N episode event vectors plus the cached
/// per-event episodic mean.
///
/// The cached mean is recomputed from the window contents on every push (not
/// maintained by running sums), so it matches a from-scratch recomputation
/// bit for bit at all times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EventBufferDump", into = "EventBufferDump")]
pub struct EventBuffer {
    taxonomy: EventTaxonomy,
    capacity: usize,
    records: VecDeque<EventVector>,
    cached_mean: Vec<f64>,
}

/// Serialized form: `{capacity, taxonomy, records}`, oldest record first.
/// The mean is derived state and is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EventBufferDump {
    capacity: usize,
    taxonomy: EventTaxonomy,
    records: Vec<EventVector>,
}

impl EventBuffer {
    pub fn new(taxonomy: EventTaxonomy, capacity: usize) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::config("event buffer capacity must be >= 1"));
        }
        let dim = taxonomy.size();
        Ok(EventBuffer {
            taxonomy,
            capacity,
            records: VecDeque::new(),
            cached_mean: vec![0.0; dim],
        })
    }

    pub fn taxonomy(&self) -> &EventTaxonomy {
        &self.taxonomy
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &EventVector> {
        self.records.iter()
    }

    /// Append one completed episode's event vector, evicting the oldest
    /// record once the window is full, and recompute the cached mean.
    pub fn push_episode(&mut self, episode: EventVector) -> Result<()> {
        if episode.len() != self.taxonomy.size() {
            return Err(Error::contract(format!(
                "episode vector length {} does not match taxonomy size {}",
                episode.len(),
                self.taxonomy.size()
            )));
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(episode);
        self.recompute_mean();
        Ok(())
    }

    /// Snapshot copy of the per-event episodic mean; all zeros while the
    /// buffer is empty (the reward then clips every mean up to tau).
    pub fn temporal_mean(&self) -> Vec<f64> {
        self.cached_mean.clone()
    }

    fn recompute_mean(&mut self) {
        let dim = self.taxonomy.size();
        let mut sums = vec![0.0f64; dim];
        for record in &self.records {
            for (s, &c) in sums.iter_mut().zip(record.counts()) {
                *s += c as f64;
            }
        }
        let n = self.records.len();
        if n == 0 {
            self.cached_mean = sums;
        } else {
            let n = n as f64;
            self.cached_mean = sums.into_iter().map(|s| s / n).collect();
        }
    }
}

impl TryFrom<EventBufferDump> for EventBuffer {
    type Error = Error;
    fn try_from(dump: EventBufferDump) -> Result<Self> {
        let mut buf = EventBuffer::new(dump.taxonomy, dump.capacity)?;
        for record in dump.records {
            buf.push_episode(record)?;
        }
        Ok(buf)
    }
}

impl From<EventBuffer> for EventBufferDump {
    fn from(buf: EventBuffer) -> EventBufferDump {
        EventBufferDump {
            capacity: buf.capacity,
            taxonomy: buf.taxonomy,
            records: buf.records.into_iter().collect(),
        }
    }
}

/// The rarity reward for an event-count vector `x` against a mean snapshot:
/// `sum_i x_i / max(mean_i, tau)`. An all-zero `x` earns 0.
pub fn rarity_reward(x: &EventVector, mean: &[f64], tau: f64) -> f64 {
    assert_eq!(
        x.len(),
        mean.len(),
        "event vector and mean must have equal length"
    );
    assert!(tau > 0.0, "tau must be positive");
    let mut total = 0.0;
    for (&count, &mu) in x.counts().iter().zip(mean.iter()) {
        if count > 0 {
            total += count as f64 / mu.max(tau);
        }
    }
    total
}

/// Rarity reward of a whole-episode vector. By linearity this equals the sum
/// of per-step rewards taken against the same (frozen) mean.
pub fn episode_reward_total(episode: &EventVector, mean: &[f64], tau: f64) -> f64 {
    rarity_reward(episode, mean, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tax(n: usize) -> EventTaxonomy {
        EventTaxonomy::new((0..n).map(|i| format!("e{i}")).collect()).unwrap()
    }

    #[test]
    fn fifo_window_of_two() {
        let mut buf = EventBuffer::new(tax(1), 2).unwrap();
        buf.push_episode(EventVector::from_counts(vec![2])).unwrap();
        buf.push_episode(EventVector::from_counts(vec![4])).unwrap();
        buf.push_episode(EventVector::from_counts(vec![6])).unwrap();
        let records: Vec<_> = buf.records().map(|r| r.counts()[0]).collect();
        assert_eq!(records, vec![4, 6]);
        assert_eq!(buf.temporal_mean(), vec![5.0]);
    }

    #[test]
    fn single_record_mean() {
        let mut buf = EventBuffer::new(tax(1), 4).unwrap();
        buf.push_episode(EventVector::from_counts(vec![3])).unwrap();
        assert_eq!(buf.temporal_mean(), vec![3.0]);
    }

    #[test]
    fn empty_buffer_mean_is_zero() {
        let buf = EventBuffer::new(tax(3), 10).unwrap();
        assert_eq!(buf.temporal_mean(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn columnwise_mean() {
        let mut buf = EventBuffer::new(tax(2), 10).unwrap();
        buf.push_episode(EventVector::from_counts(vec![1, 0])).unwrap();
        buf.push_episode(EventVector::from_counts(vec![3, 2])).unwrap();
        assert_eq!(buf.temporal_mean(), vec![2.0, 1.0]);
    }

    #[test]
    fn mean_of_identical_vectors_is_that_vector() {
        let mut buf = EventBuffer::new(tax(2), 5).unwrap();
        for _ in 0..5 {
            buf.push_episode(EventVector::from_counts(vec![7, 9])).unwrap();
        }
        assert_eq!(buf.temporal_mean(), vec![7.0, 9.0]);
    }

    #[test]
    fn snapshot_is_not_mutated_by_later_pushes() {
        let mut buf = EventBuffer::new(tax(1), 3).unwrap();
        buf.push_episode(EventVector::from_counts(vec![2])).unwrap();
        let snap = buf.temporal_mean();
        buf.push_episode(EventVector::from_counts(vec![100])).unwrap();
        assert_eq!(snap, vec![2.0]);
    }

    #[test]
    fn push_length_mismatch_is_contract_violation() {
        let mut buf = EventBuffer::new(tax(2), 3).unwrap();
        let err = buf.push_episode(EventVector::zeros(5));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn unit_occurrence_at_unit_mean_pays_one() {
        let x = EventVector::from_counts(vec![1, 0]);
        assert_eq!(rarity_reward(&x, &[1.0, 3.0], 0.01), 1.0);
    }

    #[test]
    fn never_seen_event_pays_exactly_100_at_default_tau() {
        let x = EventVector::from_counts(vec![1]);
        assert_eq!(rarity_reward(&x, &[0.0], 0.01), 100.0);
    }

    #[test]
    fn direct_evaluation_example() {
        let x = EventVector::from_counts(vec![2, 1]);
        let r = rarity_reward(&x, &[4.0, 0.5], 0.01);
        assert!((r - 2.5).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_pays_zero() {
        let x = EventVector::zeros(4);
        assert_eq!(rarity_reward(&x, &[0.0, 1.0, 2.0, 3.0], 0.01), 0.0);
        assert_eq!(episode_reward_total(&x, &[0.0, 1.0, 2.0, 3.0], 0.01), 0.0);
    }

    #[test]
    fn expected_occurrence_accumulates_one() {
        // Five occurrences at mean five pays exactly one in total.
        let episode = EventVector::from_counts(vec![5, 0]);
        let total = episode_reward_total(&episode, &[5.0, 2.0], 0.01);
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn buffer_dump_roundtrip_preserves_records_and_mean() {
        let mut buf = EventBuffer::new(tax(2), 3).unwrap();
        buf.push_episode(EventVector::from_counts(vec![1, 2])).unwrap();
        buf.push_episode(EventVector::from_counts(vec![3, 4])).unwrap();
        let json = serde_json::to_string(&buf).unwrap();
        assert!(json.contains("\"capacity\":3"));
        let back: EventBuffer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, buf);
        assert_eq!(back.temporal_mean(), buf.temporal_mean());
    }

    proptest! {
        // Linearity in x for a fixed mean.
        #[test]
        fn reward_is_linear_in_x(
            a in proptest::collection::vec(0u32..50, 1..16),
            b in proptest::collection::vec(0u32..50, 1..16),
            mean in proptest::collection::vec(0.0f64..20.0, 1..16),
        ) {
            let n = a.len().min(b.len()).min(mean.len());
            let a = EventVector::from_counts(a[..n].to_vec());
            let b = EventVector::from_counts(b[..n].to_vec());
            let mean = &mean[..n];
            let sum = a.add(&b).unwrap();
            let lhs = rarity_reward(&sum, mean, 0.01);
            let rhs = rarity_reward(&a, mean, 0.01) + rarity_reward(&b, mean, 0.01);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
        }

        // Non-increasing in each mean coordinate where x is positive.
        #[test]
        fn reward_monotone_in_mean(
            count in 1u32..20,
            mu in 0.0f64..10.0,
            bump in 0.001f64..10.0,
        ) {
            let x = EventVector::from_counts(vec![count]);
            let lo = rarity_reward(&x, &[mu], 0.01);
            let hi = rarity_reward(&x, &[mu + bump], 0.01);
            prop_assert!(hi <= lo + 1e-12);
        }

        // Bounded by total count / tau.
        #[test]
        fn reward_bounded_by_total_over_tau(
            counts in proptest::collection::vec(0u32..20, 1..16),
            mean in proptest::collection::vec(0.0f64..20.0, 1..16),
        ) {
            let n = counts.len().min(mean.len());
            let x = EventVector::from_counts(counts[..n].to_vec());
            let bound = x.total() as f64 / 0.01;
            prop_assert!(rarity_reward(&x, &mean[..n], 0.01) <= bound + 1e-9);
        }

        // Cached mean equals a from-scratch recomputation bit for bit.
        #[test]
        fn cached_mean_matches_recomputation(
            pushes in proptest::collection::vec(
                proptest::collection::vec(0u32..100, 4), 1..40),
            capacity in 1usize..8,
        ) {
            let mut buf = EventBuffer::new(tax(4), capacity).unwrap();
            let mut window: Vec<Vec<u32>> = Vec::new();
            for p in pushes {
                buf.push_episode(EventVector::from_counts(p.clone())).unwrap();
                window.push(p);
                if window.len() > capacity {
                    window.remove(0);
                }
                let mut expect = vec![0.0f64; 4];
                for rec in &window {
                    for (e, &c) in expect.iter_mut().zip(rec.iter()) {
                        *e += c as f64;
                    }
                }
                for e in expect.iter_mut() {
                    *e /= window.len() as f64;
                }
                let got = buf.temporal_mean();
                for (g, e) in got.iter().zip(expect.iter()) {
                    prop_assert_eq!(g.to_bits(), e.to_bits());
                }
            }
        }
    }
}
