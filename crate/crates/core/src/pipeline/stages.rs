//! The four staircase analyses. Each takes the survivors of the previous
//! stage and splits them into kept (annotated) and dropped (tagged with the
//! stage that dropped them).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{Label, NodeId, SensorReading, StageName};
use crate::topology::Topology;

use super::classifier::{features, ClassifierModel};
use super::{HistoryIndex, PipelineConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutput {
    pub kept: Vec<SensorReading>,
    pub dropped: Vec<SensorReading>,
}

impl StageOutput {
    fn push(&mut self, r: SensorReading, keep: bool, stage: StageName) {
        if keep {
            self.kept.push(r);
        } else {
            self.dropped.push(r.dropped_at(stage));
        }
    }
}

/// Source of alive-neighbour sets for the peer review stage.
pub trait Neighborhood {
    fn neighbors_in_round(&self, n: NodeId) -> BTreeSet<NodeId>;
}

impl Neighborhood for Topology {
    fn neighbors_in_round(&self, n: NodeId) -> BTreeSet<NodeId> {
        Topology::neighbors_in_round(self, n)
    }
}

impl Neighborhood for std::collections::BTreeMap<NodeId, BTreeSet<NodeId>> {
    fn neighbors_in_round(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.get(&n).cloned().unwrap_or_default()
    }
}

/// Out-of-band severity in band widths; zero inside the band.
pub fn priority_score(value: f64, cfg: &PipelineConfig) -> f64 {
    let width = cfg.band_width();
    ((value - cfg.band_hi) / width)
        .max((cfg.band_lo - value) / width)
        .max(0.0)
}

pub fn priority_analysis(readings: Vec<SensorReading>, cfg: &PipelineConfig) -> StageOutput {
    let mut out = StageOutput::default();
    for mut r in readings {
        let score = priority_score(r.value, cfg);
        r.annotations.priority_score = Some(score);
        out.push(r, score >= cfg.theta_p, StageName::Priority);
    }
    out
}

/// Plausibility against the physical range, then informativeness against
/// the mean of the source's forwarded history.
pub fn opinion_analysis(
    readings: Vec<SensorReading>,
    history: &HistoryIndex,
    cfg: &PipelineConfig,
) -> StageOutput {
    let mut out = StageOutput::default();
    for mut r in readings {
        if r.value < cfg.range_lo || r.value > cfg.range_hi {
            out.push(r, false, StageName::Opinion);
            continue;
        }
        let deviation = match history.mean(r.source) {
            Some(predicted) => (r.value - predicted).abs(),
            None => cfg.band_width(),
        };
        r.annotations.opinion_deviation = Some(deviation);
        out.push(r, deviation >= cfg.delta_o, StageName::Opinion);
    }
    out
}

/// Fraction of neighbouring peers in the same round that agree within `tau_r`.
/// Readings with no peers are kept with ratio 1.
pub fn review_analysis(
    readings: Vec<SensorReading>,
    round_context: &[SensorReading],
    neighborhood: &dyn Neighborhood,
    cfg: &PipelineConfig,
) -> StageOutput {
    let mut out = StageOutput::default();
    for mut r in readings {
        let neighbors = neighborhood.neighbors_in_round(r.source);
        let (peers, agreeing) = round_context
            .iter()
            .filter(|p| neighbors.contains(&p.source))
            .fold((0usize, 0usize), |(n, k), p| {
                (
                    n + 1,
                    k + usize::from((p.value - r.value).abs() <= cfg.tau_r),
                )
            });
        let ratio = if peers == 0 {
            1.0
        } else {
            agreeing as f64 / peers as f64
        };
        r.annotations.consensus_ratio = Some(ratio);
        out.push(r, ratio >= cfg.quorum_q, StageName::Review);
    }
    out
}

/// Symbolic rescue rule first, then the linear model. Without a model, only
/// `cfg.symbolic_only` permits classification (non-rescued readings are then
/// discarded).
pub fn sentiment_classify(
    readings: Vec<SensorReading>,
    model: Option<&ClassifierModel>,
    cfg: &PipelineConfig,
) -> Result<StageOutput> {
    let mut out = StageOutput::default();
    for mut r in readings {
        let rescued = r.annotations.priority_score.unwrap_or(0.0) >= cfg.rescue_score;
        let label = if rescued {
            Label::Forward
        } else {
            match model {
                Some(m) => m.decide(&features(&r, cfg)),
                None if cfg.symbolic_only => Label::Discard,
                None => return Err(Error::UntrainedModel),
            }
        };
        r.annotations.class_label = Some(label);
        out.push(r, label == Label::Forward, StageName::Sentiment);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    fn r(source: usize, value: f64) -> SensorReading {
        SensorReading::new(NodeId(source), 0, value)
    }

    #[test]
    fn priority_examples() {
        let c = cfg();
        let out = priority_analysis(vec![r(0, 25.0)], &c);
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped[0].annotations.priority_score, Some(0.0));
        assert_eq!(
            out.dropped[0].annotations.drop_stage,
            Some(StageName::Priority)
        );

        let out = priority_analysis(vec![r(0, 35.0)], &c);
        assert_eq!(out.kept[0].annotations.priority_score, Some(0.5));

        // boundary is inclusive: (20 - 19) / 10 = 0.1
        let out = priority_analysis(vec![r(0, 19.0)], &c);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].annotations.priority_score, Some(0.1));
    }

    #[test]
    fn opinion_examples() {
        let c = cfg();
        let mut h = HistoryIndex::default();
        let out = opinion_analysis(vec![r(0, 40.0)], &h, &c);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(
            out.kept[0].annotations.opinion_deviation,
            Some(c.band_width())
        );

        h.push(NodeId(1), 25.0, 4);
        let out = opinion_analysis(vec![r(1, 25.0)], &h, &c);
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(out.dropped[0].annotations.opinion_deviation, Some(0.0));

        let mut h = HistoryIndex::default();
        h.push(NodeId(2), 24.0, 4);
        h.push(NodeId(2), 26.0, 4);
        let out = opinion_analysis(vec![r(2, 28.0)], &h, &c);
        assert_eq!(out.kept[0].annotations.opinion_deviation, Some(3.0));
    }

    #[test]
    fn opinion_drops_implausible_values() {
        let c = cfg();
        let h = HistoryIndex::default();
        let out = opinion_analysis(vec![r(0, c.range_hi + 1.0), r(1, c.range_lo - 1.0)], &h, &c);
        assert!(out.kept.is_empty());
        assert!(out
            .dropped
            .iter()
            .all(|d| d.annotations.drop_stage == Some(StageName::Opinion)));
    }

    #[test]
    fn review_examples() {
        let c = cfg();
        let mut nb: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        let out = review_analysis(vec![r(0, 30.0)], &[r(0, 30.0)], &nb, &c);
        assert_eq!(out.kept[0].annotations.consensus_ratio, Some(1.0));

        nb.insert(NodeId(0), (1..=4).map(NodeId).collect());
        let ctx: Vec<_> = (1..=4).map(|i| r(i, 30.5)).collect();
        let out = review_analysis(vec![r(0, 30.0)], &ctx, &nb, &c);
        assert_eq!(out.kept[0].annotations.consensus_ratio, Some(1.0));

        let c = PipelineConfig {
            quorum_q: 0.5,
            ..cfg()
        };
        nb.insert(NodeId(0), (1..=3).map(NodeId).collect());
        let ctx = vec![r(1, 31.0), r(2, 40.0), r(3, 10.0)];
        let out = review_analysis(vec![r(0, 30.0)], &ctx, &nb, &c);
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped[0].annotations.consensus_ratio, Some(1.0 / 3.0));
        assert_eq!(
            out.dropped[0].annotations.drop_stage,
            Some(StageName::Review)
        );
    }

    fn scored(score: f64) -> SensorReading {
        let mut x = r(0, 25.0);
        x.annotations.priority_score = Some(score);
        x.annotations.opinion_deviation = Some(1.0);
        x.annotations.consensus_ratio = Some(1.0);
        x
    }

    #[test]
    fn sentiment_examples() {
        let c = cfg();
        let zero = ClassifierModel::zero();
        let out = sentiment_classify(vec![scored(2.0)], Some(&zero), &c).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].annotations.class_label, Some(Label::Forward));

        let out = sentiment_classify(vec![scored(0.5)], Some(&zero), &c).unwrap();
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(
            out.dropped[0].annotations.drop_stage,
            Some(StageName::Sentiment)
        );

        let m = ClassifierModel::new([1.0, 0.0, 0.0, 0.0, -0.05]);
        let out = sentiment_classify(vec![scored(0.5)], Some(&m), &c).unwrap();
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn sentiment_without_model() {
        let c = cfg();
        assert_eq!(
            sentiment_classify(vec![scored(0.5)], None, &c),
            Err(Error::UntrainedModel)
        );
        // rescued readings never need the model
        assert!(sentiment_classify(vec![scored(1.5)], None, &c).is_ok());
        let c = PipelineConfig {
            symbolic_only: true,
            ..cfg()
        };
        let out = sentiment_classify(vec![scored(0.5), scored(1.5)], None, &c).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.dropped.len(), 1);
    }
}
