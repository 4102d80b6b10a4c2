//! The sub-sink's staircase filter: priority, opinion, review and sentiment
//! analyses applied strictly in that order, each seeing only the survivors
//! of the one before.

pub mod classifier;
pub mod stages;

use std::collections::{BTreeMap, VecDeque};

use crate::aggregation::RoundSnapshot;
use crate::error::{Error, Result};
use crate::model::{canonical_order, NodeId, Round, SensorReading, StageName};

pub use classifier::{
    features, train_classifier, training_accuracy, ClassifierModel, FeatureVector,
};
pub use stages::{
    opinion_analysis, priority_analysis, priority_score, review_analysis, sentiment_classify,
    Neighborhood, StageOutput,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    pub theta_p: f64,
    pub window_w: usize,
    pub delta_o: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub tau_r: f64,
    pub quorum_q: f64,
    pub rescue_score: f64,
    /// Decide with the rescue rule alone when no classifier is supplied.
    pub symbolic_only: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band_lo: 20.0,
            band_hi: 30.0,
            theta_p: 0.1,
            window_w: 4,
            delta_o: 0.5,
            range_lo: -40.0,
            range_hi: 85.0,
            tau_r: 2.0,
            quorum_q: 0.3,
            rescue_score: 1.0,
            symbolic_only: false,
        }
    }
}

impl PipelineConfig {
    /// Every stage keeps every reading.
    pub fn permissive() -> Self {
        Self {
            theta_p: 0.0,
            delta_o: 0.0,
            range_lo: -1e300,
            range_hi: 1e300,
            tau_r: 0.0,
            quorum_q: 0.0,
            rescue_score: 0.0,
            ..Self::default()
        }
    }

    pub fn band_width(&self) -> f64 {
        self.band_hi - self.band_lo
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        // written negated so that NaN bounds are rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.band_lo < self.band_hi) {
            return bad("band_lo must be below band_hi");
        }
        if !(self.range_lo <= self.band_lo && self.band_hi <= self.range_hi) {
            return bad("the plausible range must contain the nominal band");
        }
        if self.theta_p < 0.0 || self.delta_o < 0.0 || self.tau_r < 0.0 || self.rescue_score < 0.0 {
            return bad("thresholds must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.quorum_q) {
            return bad("quorum_q must lie in [0, 1]");
        }
        if self.window_w == 0 {
            return bad("window_w must be positive");
        }
        Ok(())
    }
}

/// Last `window_w` forwarded values per source, kept by the sub-sink.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryIndex {
    entries: BTreeMap<NodeId, VecDeque<f64>>,
}

impl HistoryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, source: NodeId, value: f64, window: usize) {
        let h = self.entries.entry(source).or_default();
        h.push_back(value);
        while h.len() > window {
            h.pop_front();
        }
    }

    pub fn values(&self, source: NodeId) -> Option<&VecDeque<f64>> {
        self.entries.get(&source)
    }

    pub fn mean(&self, source: NodeId) -> Option<f64> {
        let h = self.entries.get(&source).filter(|h| !h.is_empty())?;
        Some(h.iter().sum::<f64>() / h.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropRecord {
    pub source: NodeId,
    pub round: Round,
    pub value: f64,
    pub stage: StageName,
}

/// Per-stage counts and every drop, in stage order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTrace {
    pub inputs: [usize; 4],
    pub outputs: [usize; 4],
    pub drops: Vec<DropRecord>,
}

impl StageTrace {
    pub fn telescopes(&self) -> bool {
        (0..3).all(|i| self.outputs[i] == self.inputs[i + 1])
            && (0..4).all(|i| self.inputs[i] - self.outputs[i] == self.drops_at(StageName::ALL[i]))
    }

    pub fn drops_at(&self, stage: StageName) -> usize {
        self.drops.iter().filter(|d| d.stage == stage).count()
    }
}

/// Everything a stage may consult besides its input readings.
pub struct StageContext<'a> {
    pub cfg: &'a PipelineConfig,
    pub history: &'a HistoryIndex,
    pub round_context: &'a [SensorReading],
    pub neighborhood: &'a dyn Neighborhood,
    pub model: Option<&'a ClassifierModel>,
}

/// One step of the staircase. Implementations must return every input
/// reading exactly once, either kept or dropped.
pub trait FilterStage {
    fn stage(&self) -> StageName;
    fn apply(&self, readings: Vec<SensorReading>, ctx: &StageContext<'_>) -> Result<StageOutput>;
}

pub struct PriorityStage;
pub struct OpinionStage;
pub struct ReviewStage;
pub struct SentimentStage;

impl FilterStage for PriorityStage {
    fn stage(&self) -> StageName {
        StageName::Priority
    }
    fn apply(&self, readings: Vec<SensorReading>, ctx: &StageContext<'_>) -> Result<StageOutput> {
        Ok(priority_analysis(readings, ctx.cfg))
    }
}

impl FilterStage for OpinionStage {
    fn stage(&self) -> StageName {
        StageName::Opinion
    }
    fn apply(&self, readings: Vec<SensorReading>, ctx: &StageContext<'_>) -> Result<StageOutput> {
        Ok(opinion_analysis(readings, ctx.history, ctx.cfg))
    }
}

impl FilterStage for ReviewStage {
    fn stage(&self) -> StageName {
        StageName::Review
    }
    fn apply(&self, readings: Vec<SensorReading>, ctx: &StageContext<'_>) -> Result<StageOutput> {
        Ok(review_analysis(
            readings,
            ctx.round_context,
            ctx.neighborhood,
            ctx.cfg,
        ))
    }
}

impl FilterStage for SentimentStage {
    fn stage(&self) -> StageName {
        StageName::Sentiment
    }
    fn apply(&self, readings: Vec<SensorReading>, ctx: &StageContext<'_>) -> Result<StageOutput> {
        sentiment_classify(readings, ctx.model, ctx.cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    /// Survivors of all four stages.
    pub intelligent: Vec<SensorReading>,
    pub trace: StageTrace,
    /// Readings that left the staircase, each tagged with its drop stage.
    pub dropped: Vec<SensorReading>,
}

/// Four stages in fixed order. Alternate implementations can be slotted in,
/// but each slot only accepts a stage of the matching kind.
pub struct Staircase {
    stages: [Box<dyn FilterStage + Send + Sync>; 4],
}

impl Default for Staircase {
    fn default() -> Self {
        Self {
            stages: [
                Box::new(PriorityStage),
                Box::new(OpinionStage),
                Box::new(ReviewStage),
                Box::new(SentimentStage),
            ],
        }
    }
}

impl Staircase {
    pub fn with_stage(mut self, stage: Box<dyn FilterStage + Send + Sync>) -> Self {
        let slot = stage.stage().index();
        self.stages[slot] = stage;
        self
    }

    /// Runs the staircase over `readings` and, if `history` is given, appends
    /// the survivors to it.
    pub fn run(
        &self,
        readings: Vec<SensorReading>,
        ctx: &StageContext<'_>,
    ) -> Result<PipelineOutput> {
        let mut current = canonical_order(readings);
        let mut out = PipelineOutput::default();
        for (i, stage) in self.stages.iter().enumerate() {
            let name = StageName::ALL[i];
            out.trace.inputs[i] = current.len();
            let n_in = current.len();
            let StageOutput { kept, dropped } = stage.apply(current, ctx)?;
            assert_eq!(
                kept.len() + dropped.len(),
                n_in,
                "{name} stage must account for every input reading"
            );
            out.trace.outputs[i] = kept.len();
            for d in dropped {
                debug_assert_eq!(d.annotations.drop_stage, Some(name));
                out.trace.drops.push(DropRecord {
                    source: d.source,
                    round: d.round,
                    value: d.value,
                    stage: name,
                });
                out.dropped.push(d);
            }
            current = kept;
        }
        out.intelligent = current;
        Ok(out)
    }
}

/// Runs the default staircase on a deduplicated snapshot. `round_context`
/// is every post-dedup reading of the round seen by the sub-sink. The
/// history index is updated with forwarded values only.
pub fn run_pipeline(
    snapshot: &RoundSnapshot,
    round_context: &[SensorReading],
    neighborhood: &dyn Neighborhood,
    cfg: &PipelineConfig,
    model: Option<&ClassifierModel>,
    history: &mut HistoryIndex,
) -> Result<PipelineOutput> {
    let out = {
        let ctx = StageContext {
            cfg,
            history,
            round_context,
            neighborhood,
            model,
        };
        Staircase::default().run(snapshot.readings.clone(), &ctx)?
    };
    for r in &out.intelligent {
        history.push(r.source, r.value, cfg.window_w);
    }
    Ok(out)
}
