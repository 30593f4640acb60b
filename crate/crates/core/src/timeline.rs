//! Concurrency oracle and causally consecutive activity-instance pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::log_io::{ActivityInstance, ActivityInstanceLog};

/// Symmetric set of activity pairs considered concurrent.
///
/// Pairs are stored in both orientations so membership is a single lookup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConcurrencyRelation {
    pub threshold: f64,
    pairs: BTreeSet<(String, String)>,
}

impl ConcurrencyRelation {
    pub fn empty(threshold: f64) -> Self {
        Self {
            threshold,
            pairs: BTreeSet::new(),
        }
    }

    /// Declares `a ∥ b`. Self-pairs are ignored.
    pub fn insert(&mut self, a: &str, b: &str) {
        if a != b {
            self.pairs.insert((a.to_string(), b.to_string()));
            self.pairs.insert((b.to_string(), a.to_string()));
        }
    }

    pub fn are_concurrent(&self, a: &str, b: &str) -> bool {
        a != b && self.pairs.contains(&(a.to_string(), b.to_string()))
    }

    /// Unordered pairs, each reported once as `(lower, higher)`.
    pub fn unordered_pairs(&self) -> Vec<(&str, &str)> {
        self.pairs
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Builds the overlap-ratio concurrency oracle.
///
/// For every pair of distinct activities, counts the traces where both occur
/// and, among those, the traces where some instance of one overlaps some
/// instance of the other in time. The pair is concurrent when
/// `overlapping / co-occurring >= zeta`.
pub fn discover_concurrency(log: &ActivityInstanceLog, zeta: f64) -> ConcurrencyRelation {
    let mut co_occurrences: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for indices in log.traces().values() {
        let mut by_activity: BTreeMap<&str, Vec<&ActivityInstance>> = BTreeMap::new();
        for &idx in indices {
            let inst = &log.instances[idx];
            by_activity
                .entry(inst.activity.as_str())
                .or_default()
                .push(inst);
        }
        let activities: Vec<(&str, Vec<&ActivityInstance>)> = by_activity.into_iter().collect();
        for (i, (a, a_insts)) in activities.iter().enumerate() {
            for (b, b_insts) in &activities[i + 1..] {
                let overlap = a_insts
                    .iter()
                    .any(|x| b_insts.iter().any(|y| x.start < y.end && y.start < x.end));
                let entry = co_occurrences.entry((a, b)).or_default();
                entry.0 += 1;
                if overlap {
                    entry.1 += 1;
                }
            }
        }
    }

    let mut rel = ConcurrencyRelation::empty(zeta);
    for ((a, b), (together, overlapping)) in co_occurrences {
        if together > 0 && overlapping as f64 / together as f64 >= zeta {
            rel.insert(a, b);
        }
    }
    rel
}

/// A causally consecutive pair, as indices into the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CausalPair {
    pub source: usize,
    pub target: usize,
}

/// Causally consecutive pairs plus the instances without a causal
/// predecessor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPairSet {
    /// Sorted by target index.
    pub pairs: Vec<CausalPair>,
    /// Sorted instance indices.
    pub orphans: Vec<usize>,
}

impl CausalPairSet {
    pub fn source_of(&self, target: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&target, |p| p.target)
            .ok()
            .map(|i| self.pairs[i].source)
    }
}

/// Whether `candidate` wins the argmax of end time over `current`.
/// Ties break by the lexicographically smaller activity label, then by the
/// earlier log position.
fn beats(log: &ActivityInstanceLog, candidate: usize, current: usize) -> bool {
    let c = &log.instances[candidate];
    let b = &log.instances[current];
    (
        c.end,
        std::cmp::Reverse(c.activity.as_str()),
        std::cmp::Reverse(candidate),
    ) > (
        b.end,
        std::cmp::Reverse(b.activity.as_str()),
        std::cmp::Reverse(current),
    )
}

/// For each instance, picks among the same-trace instances that end no later
/// than its start and whose activity is not concurrent with its own, the one
/// with the maximum end time.
pub fn causal_pairs(log: &ActivityInstanceLog, rel: &ConcurrencyRelation) -> CausalPairSet {
    let mut result = CausalPairSet::default();
    for indices in log.traces().values() {
        let mut by_end = indices.clone();
        by_end.sort_by_key(|&i| log.instances[i].end);
        for &target in indices {
            let t = &log.instances[target];
            // Only instances ending at or before the target start qualify.
            let upper = by_end.partition_point(|&i| log.instances[i].end <= t.start);
            let mut best: Option<usize> = None;
            for &cand in by_end[..upper].iter().rev() {
                if cand == target {
                    continue;
                }
                let c = &log.instances[cand];
                if let Some(b) = best {
                    if c.end < log.instances[b].end {
                        break;
                    }
                }
                if rel.are_concurrent(&c.activity, &t.activity) {
                    continue;
                }
                if best.is_none_or(|b| beats(log, cand, b)) {
                    best = Some(cand);
                }
            }
            match best {
                Some(source) => result.pairs.push(CausalPair { source, target }),
                None => result.orphans.push(target),
            }
        }
    }
    result.pairs.sort_by_key(|p| p.target);
    result.orphans.sort_unstable();
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::utc;

    fn inst(trace: &str, act: &str, s: i64, e: i64) -> ActivityInstance {
        ActivityInstance::new(trace, act, s, e, "R")
    }

    #[test]
    fn relation_is_symmetric_and_irreflexive() {
        let mut rel = ConcurrencyRelation::empty(0.5);
        rel.insert("A", "B");
        rel.insert("C", "C");
        assert!(rel.are_concurrent("A", "B"));
        assert!(rel.are_concurrent("B", "A"));
        assert!(!rel.are_concurrent("C", "C"));
        assert_eq!(rel.unordered_pairs(), vec![("A", "B")]);
    }

    #[test]
    fn zero_threshold_marks_all_cooccurring_pairs() {
        let log = ActivityInstanceLog::new(vec![
            inst("1", "A", 0, 10),
            inst("1", "B", 10, 20),
            inst("2", "C", 0, 5),
        ]);
        let rel = discover_concurrency(&log, 0.0);
        assert_eq!(rel.unordered_pairs(), vec![("A", "B")]);
        assert!(discover_concurrency(&log, 0.01).is_empty());
    }

    #[test]
    fn touching_instances_precede() {
        let log = ActivityInstanceLog::new(vec![inst("1", "A", 0, 10), inst("1", "B", 10, 20)]);
        let pairs = causal_pairs(&log, &ConcurrencyRelation::empty(0.75));
        assert_eq!(
            pairs.pairs,
            vec![CausalPair {
                source: 0,
                target: 1
            }]
        );
        assert_eq!(pairs.orphans, vec![0]);
    }

    #[test]
    fn tie_breaks_on_label_then_position() {
        let log = ActivityInstanceLog::new(vec![
            inst("1", "Z", 0, 10),
            inst("1", "B", 0, 10),
            inst("1", "B", 5, 10),
            inst("1", "C", 20, 30),
        ]);
        let pairs = causal_pairs(&log, &ConcurrencyRelation::empty(0.75));
        assert_eq!(pairs.source_of(3), Some(1));
    }

    #[test]
    fn concurrent_predecessors_are_skipped() {
        let log = ActivityInstanceLog::new(vec![
            inst("1", "A", 0, 10),
            inst("1", "B", 10, 15),
            inst("1", "C", 20, 30),
        ]);
        let mut rel = ConcurrencyRelation::empty(0.75);
        rel.insert("B", "C");
        let pairs = causal_pairs(&log, &rel);
        assert_eq!(pairs.source_of(2), Some(0));
    }

    #[test]
    fn zero_length_instance_is_not_its_own_predecessor() {
        let t = utc(2021, 1, 1, 0, 0, 0);
        let log = ActivityInstanceLog::new(vec![inst("1", "A", t, t)]);
        let pairs = causal_pairs(&log, &ConcurrencyRelation::empty(0.75));
        assert_eq!(pairs.orphans, vec![0]);
    }
}
