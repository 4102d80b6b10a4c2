//! Aggregator-node redundancy removal.
//!
//! Two rules run in order over a canonically ordered round snapshot: exact
//! duplicates collapse to one copy, then a reading is suppressed when it lies
//! within `eps` of the last value this aggregator forwarded for the same
//! source in an earlier round.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{canonical_order, NodeId, Round, SensorReading};

/// One aggregator's view of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSnapshot {
    pub round: Round,
    pub readings: Vec<SensorReading>,
    pub redundancy_removed: usize,
}

impl RoundSnapshot {
    /// Number of readings the snapshot was created with.
    pub fn input_count(&self) -> usize {
        self.readings.len() + self.redundancy_removed
    }
}

pub fn collect_round(incoming: Vec<SensorReading>, round: Round) -> Result<RoundSnapshot> {
    if let Some(stale) = incoming.iter().find(|r| r.round != round) {
        return Err(Error::StaleReading {
            source_id: stale.source,
            reading_round: stale.round,
            expected: round,
        });
    }
    Ok(RoundSnapshot {
        round,
        readings: canonical_order(incoming),
        redundancy_removed: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LastForwarded {
    /// Last value forwarded before `current.0`.
    before: Option<f64>,
    current: (Round, f64),
}

/// Per-source index of the last forwarded value. Lookups for round `r` only
/// see values forwarded in rounds before `r`, so re-running a round is
/// idempotent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuppressionIndex {
    entries: BTreeMap<NodeId, LastForwarded>,
}

impl SuppressionIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reference(&self, source: NodeId, round: Round) -> Option<f64> {
        let e = self.entries.get(&source)?;
        if e.current.0 < round {
            Some(e.current.1)
        } else {
            e.before
        }
    }

    pub fn record(&mut self, source: NodeId, round: Round, value: f64) {
        match self.entries.get_mut(&source) {
            None => {
                self.entries.insert(
                    source,
                    LastForwarded {
                        before: None,
                        current: (round, value),
                    },
                );
            }
            Some(e) if e.current.0 < round => {
                e.before = Some(e.current.1);
                e.current = (round, value);
            }
            Some(e) => e.current = (round, value),
        }
    }
}

/// Applies both redundancy rules and records the retained values in `index`.
pub fn deduplicate(s: RoundSnapshot, eps: f64, index: &mut SuppressionIndex) -> RoundSnapshot {
    debug_assert!(eps >= 0.0);
    let round = s.round;
    let before = s.readings.len();
    let ordered = canonical_order(s.readings);

    let mut distinct: Vec<SensorReading> = Vec::with_capacity(ordered.len());
    for r in ordered {
        if distinct.last().is_some_and(|prev| prev.same_sample(&r)) {
            continue;
        }
        distinct.push(r);
    }

    let retained: Vec<SensorReading> = distinct
        .into_iter()
        .filter(|r| match index.reference(r.source, round) {
            Some(last) => (r.value - last).abs() > eps,
            None => true,
        })
        .collect();

    for r in &retained {
        index.record(r.source, round, r.value);
    }

    RoundSnapshot {
        round,
        redundancy_removed: s.redundancy_removed + (before - retained.len()),
        readings: retained,
    }
}

pub fn redundancy_ratio(s: &RoundSnapshot) -> Result<f64> {
    match s.input_count() {
        0 => Err(Error::EmptySnapshot),
        n => Ok(s.redundancy_removed as f64 / n as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(source: usize, round: Round, value: f64) -> SensorReading {
        SensorReading::new(NodeId(source), round, value)
    }

    #[test]
    fn collect_round_examples() {
        let s = collect_round(vec![], 0).unwrap();
        assert!(s.readings.is_empty());

        let s = collect_round(vec![r(2, 5, 1.0), r(0, 5, 1.0), r(1, 5, 1.0)], 5).unwrap();
        let order: Vec<_> = s.readings.iter().map(|x| x.source.index()).collect();
        assert_eq!(order, vec![0, 1, 2]);

        let err = collect_round(vec![r(0, 4, 1.0)], 5).unwrap_err();
        assert!(matches!(
            err,
            Error::StaleReading {
                reading_round: 4,
                expected: 5,
                ..
            }
        ));
    }

    #[test]
    fn distinct_values_with_zero_eps_pass_through() {
        let mut idx = SuppressionIndex::new();
        let s = collect_round(vec![r(0, 0, 1.0), r(1, 0, 2.0), r(2, 0, 3.0)], 0).unwrap();
        let out = deduplicate(s.clone(), 0.0, &mut idx);
        assert_eq!(out.readings, s.readings);
        assert_eq!(out.redundancy_removed, 0);
    }

    #[test]
    fn exact_duplicates_collapse() {
        let mut idx = SuppressionIndex::new();
        let s = collect_round(vec![r(3, 1, 7.5), r(3, 1, 7.5)], 1).unwrap();
        let out = deduplicate(s, 0.1, &mut idx);
        assert_eq!(out.readings.len(), 1);
        assert_eq!(out.redundancy_removed, 1);
    }

    #[test]
    fn temporal_suppression_tracks_last_forwarded() {
        let mut idx = SuppressionIndex::new();
        let eps = 0.5;
        let run = |idx: &mut SuppressionIndex, round, v| {
            let s = collect_round(vec![r(0, round, v)], round).unwrap();
            deduplicate(s, eps, idx).readings.len()
        };
        assert_eq!(run(&mut idx, 0, 10.0), 1);
        assert_eq!(run(&mut idx, 1, 10.3), 0);
        // compared against 10.0 (last forwarded), not 10.3 (last sensed)
        assert_eq!(run(&mut idx, 2, 10.6), 1);
        assert_eq!(run(&mut idx, 3, 10.6), 0);
        assert_eq!(run(&mut idx, 4, 10.2), 0);
    }

    #[test]
    fn rerunning_a_round_is_idempotent() {
        let mut idx = SuppressionIndex::new();
        let first = collect_round(vec![r(0, 0, 1.0)], 0).unwrap();
        deduplicate(first, 0.1, &mut idx);
        let s = collect_round(vec![r(0, 1, 1.05), r(1, 1, 4.0), r(0, 1, 2.0)], 1).unwrap();
        let once = deduplicate(s, 0.1, &mut idx);
        let twice = deduplicate(once.clone(), 0.1, &mut idx);
        assert_eq!(once, twice);
    }

    #[test]
    fn redundancy_ratio_examples() {
        let snap = |kept: usize, removed: usize| RoundSnapshot {
            round: 0,
            readings: (0..kept).map(|i| r(i, 0, i as f64)).collect(),
            redundancy_removed: removed,
        };
        assert_eq!(redundancy_ratio(&snap(10, 0)).unwrap(), 0.0);
        assert_eq!(redundancy_ratio(&snap(0, 10)).unwrap(), 1.0);
        assert_eq!(redundancy_ratio(&snap(9, 3)).unwrap(), 0.25);
        assert_eq!(redundancy_ratio(&snap(0, 0)), Err(Error::EmptySnapshot));
    }
}
