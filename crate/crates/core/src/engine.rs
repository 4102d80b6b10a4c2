//! Lock-step round loop: sensing, sensor-to-aggregator transfer, redundancy
//! removal, the sub-sink staircase and final dissemination to the sink.
//!
//! Randomness comes from purpose-tagged streams seeded from the run seed.
//! Each round first draws new events, then one gaussian sample per sensor in
//! id order (dead sensors included, so trajectories never depend on deaths).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::aggregation::{collect_round, deduplicate, SuppressionIndex};
use crate::dissemination::{
    baseline_forward_all, send_along, Delivery, Dispatch, Link, TransmissionEvent,
};
use crate::energy::EnergyState;
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecorder, MetricsReport, Observation};
use crate::model::{
    canonical_order, Label, Node, NodeId, NodeRole, Position, Round, SensorReading, StageName,
};
use crate::pipeline::{
    features, train_classifier, training_accuracy, ClassifierModel, FeatureVector, FilterStage,
    HistoryIndex, StageContext, StageOutput, StageTrace, Staircase,
};
use crate::rng::{stream_seed, Stream};
use crate::scenario::{EventParams, FieldParams, Mode, ScenarioConfig};
use crate::topology::{build_topology, Topology};

/// An injected field disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveEvent {
    pub center: Position,
    pub magnitude: f64,
    pub remaining: u64,
}

/// Injected events. Never visible to the filters; used for labels and accuracy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub active: Vec<ActiveEvent>,
    pub radius: f64,
}

impl GroundTruth {
    pub fn new(radius: f64) -> Self {
        Self {
            active: Vec::new(),
            radius,
        }
    }

    fn spawn(&mut self, params: &EventParams, area: (Position, Position), rng: &mut ChaCha8Rng) {
        if params.rate <= 0.0 || params.duration == 0 {
            return;
        }
        let count = Poisson::new(params.rate)
            .expect("rate is positive")
            .sample(rng) as u64;
        let (lo, hi) = area;
        for _ in 0..count {
            let x = if hi.x > lo.x {
                rng.random_range(lo.x..=hi.x)
            } else {
                lo.x
            };
            let y = if hi.y > lo.y {
                rng.random_range(lo.y..=hi.y)
            } else {
                lo.y
            };
            self.active.push(ActiveEvent {
                center: Position::new(x, y),
                magnitude: params.magnitude,
                remaining: params.duration,
            });
        }
    }

    fn expire(&mut self) {
        for e in &mut self.active {
            e.remaining -= 1;
        }
        self.active.retain(|e| e.remaining > 0);
    }

    /// Summed magnitude of the active events covering `p`, and whether any does.
    pub fn influence(&self, p: &Position) -> (f64, bool) {
        self.active
            .iter()
            .filter(|e| e.center.distance(p) <= self.radius)
            .fold((0.0, false), |(sum, _), e| (sum + e.magnitude, true))
    }
}

/// Smooth field component at a round.
pub fn field_value(field: &FieldParams, round: Round) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * round as f64 / field.drift_period;
    field.base + field.drift_amplitude * phase.sin()
}

fn noise_sample(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    Normal::new(0.0, sigma)
        .expect("sigma is finite and non-negative")
        .sample(rng)
}

/// One sample: field drift plus gaussian noise plus covering events.
pub fn sense(
    node: &Node,
    round: Round,
    field: &FieldParams,
    truth: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> SensorReading {
    let noise = noise_sample(rng, field.noise_sigma);
    let (bump, _) = truth.influence(&node.position);
    SensorReading::new(node.id, round, field_value(field, round) + noise + bump)
}

/// Everything that happened in one round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundOutput {
    pub round: Round,
    pub generated: Vec<SensorReading>,
    pub events: Vec<TransmissionEvent>,
    pub trace: Option<StageTrace>,
    pub delivered: Vec<Delivery>,
    pub lost: usize,
    pub died: Vec<NodeId>,
}

/// Sentiment slot used during the labelled warm-up: forwards every review
/// survivor so the examples cover the whole classifier input.
struct ForwardAll;

impl FilterStage for ForwardAll {
    fn stage(&self) -> StageName {
        StageName::Sentiment
    }
    fn apply(&self, readings: Vec<SensorReading>, _: &StageContext<'_>) -> Result<StageOutput> {
        Ok(StageOutput {
            kept: readings,
            dropped: Vec::new(),
        })
    }
}

/// Mutable state of one run. Only [`Simulation::step_round`] writes to it.
pub struct Simulation {
    cfg: ScenarioConfig,
    topology: Topology,
    energy: Vec<EnergyState>,
    truth: GroundTruth,
    area: (Position, Position),
    event_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    suppression: BTreeMap<NodeId, SuppressionIndex>,
    history: HistoryIndex,
    model: Option<ClassifierModel>,
    staircase: Staircase,
    recorder: MetricsRecorder,
    training: Option<Vec<(FeatureVector, Label)>>,
    /// Sensors covered by an event in the current round.
    labeled: BTreeSet<NodeId>,
    round: Round,
    finished: bool,
}

fn area_of(t: &Topology) -> (Position, Position) {
    let mut lo = Position::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Position::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in t.nodes() {
        lo.x = lo.x.min(n.position.x);
        lo.y = lo.y.min(n.position.y);
        hi.x = hi.x.max(n.position.x);
        hi.y = hi.y.max(n.position.y);
    }
    (lo, hi)
}

impl Simulation {
    /// Validates the scenario and builds the initial network. The classifier
    /// is used as given; see [`run_with_model`] for automatic training.
    pub fn new(cfg: ScenarioConfig, model: Option<ClassifierModel>) -> Result<Self> {
        cfg.validate()?;
        let topology = build_topology(&cfg, cfg.seed)?;
        Self::with_topology(cfg, topology, model)
    }

    /// Starts a run on a prebuilt topology.
    pub fn with_topology(
        cfg: ScenarioConfig,
        topology: Topology,
        model: Option<ClassifierModel>,
    ) -> Result<Self> {
        if cfg.mode == Mode::Framework {
            if topology.sub_sink().is_none() {
                return Err(Error::InvalidScenario(
                    "framework mode needs a sub-sink".into(),
                ));
            }
            if topology.aggregators().is_empty() {
                return Err(Error::InvalidScenario(
                    "framework mode needs at least one aggregator".into(),
                ));
            }
        }
        let energy = topology
            .nodes()
            .iter()
            .map(|n| match n.role {
                NodeRole::Sink => EnergyState::infinite(),
                _ => EnergyState::new(cfg.initial_energy),
            })
            .collect();
        let area = area_of(&topology);
        Ok(Self {
            truth: GroundTruth::new(cfg.events.radius),
            event_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, Stream::Events)),
            noise_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, Stream::Noise)),
            suppression: BTreeMap::new(),
            history: HistoryIndex::new(),
            staircase: Staircase::default(),
            recorder: MetricsRecorder::new(cfg.mode),
            training: None,
            labeled: BTreeSet::new(),
            round: 0,
            finished: false,
            area,
            energy,
            topology,
            model,
            cfg,
        })
    }

    /// Turns this run into a labelled warm-up: the sentiment slot forwards
    /// everything and each review survivor becomes a training example.
    fn into_warmup(mut self) -> Self {
        self.staircase = Staircase::default().with_stage(Box::new(ForwardAll));
        self.training = Some(Vec::new());
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn energy(&self) -> &[EnergyState] {
        &self.energy
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.finished || self.round >= self.cfg.rounds
    }

    fn link(&self) -> Link {
        Link {
            radio: self.cfg.radio,
            sizing: self.cfg.sizing,
            batch_cap: self.cfg.batch_cap,
            round: self.round,
        }
    }

    /// True while some alive sensor still has a complete path to the sink
    /// under the current mode's routing.
    pub fn network_alive(&self) -> bool {
        let t = &self.topology;
        let reaches = |s: NodeId| match self.cfg.mode {
            Mode::Baseline => t.cached_sink_route(s).is_some(),
            Mode::Framework => {
                let Some(route) = t.cached_collector_route(s) else {
                    return false;
                };
                let agg = *route.last().unwrap();
                let Some(to_sub) = t.cached_collector_route(agg) else {
                    return false;
                };
                let sub = *to_sub.last().unwrap();
                t.cached_collector_route(sub).is_some()
            }
        };
        t.sensors().any(|s| t.is_alive(s) && reaches(s))
    }

    fn record(&mut self, obs: Observation<'_>) {
        self.recorder.record(&obs);
    }

    /// Advances one round. Returns `None` once the run has ended, either
    /// because all rounds ran or because the network died.
    pub fn step_round(&mut self) -> Result<Option<RoundOutput>> {
        if self.is_finished() {
            return Ok(None);
        }
        let round = self.round;
        if !self.network_alive() {
            self.record(Observation::NetworkDied { round });
            self.finished = true;
            return Ok(None);
        }
        let alive_before: Vec<bool> = self.energy.iter().map(|e| e.alive).collect();

        self.truth
            .spawn(&self.cfg.events, self.area, &mut self.event_rng);
        let mut generated = Vec::new();
        let mut labeled = BTreeSet::new();
        let sensors: Vec<NodeId> = self.topology.sensors().collect();
        for s in sensors {
            let node = self.topology.node(s).clone();
            if self.topology.is_alive(s) {
                let r = sense(
                    &node,
                    round,
                    &self.cfg.field,
                    &self.truth,
                    &mut self.noise_rng,
                );
                if self.truth.influence(&node.position).1 {
                    labeled.insert(s);
                }
                generated.push(r);
            } else {
                noise_sample(&mut self.noise_rng, self.cfg.field.noise_sigma);
            }
        }
        self.truth.expire();
        for r in &generated {
            self.record(Observation::Generated {
                event_labeled: labeled.contains(&r.source),
            });
        }
        self.labeled = labeled;

        let mut out = RoundOutput {
            round,
            generated: generated.clone(),
            ..RoundOutput::default()
        };
        match self.cfg.mode {
            Mode::Baseline => {
                self.record(Observation::Unfiltered {
                    count: generated.len(),
                });
                let link = self.link();
                let d =
                    baseline_forward_all(&generated, &mut self.topology, &mut self.energy, link);
                out.events = d.events;
                out.delivered = d.delivered;
                out.lost = d.lost.len();
            }
            Mode::Framework => self.framework_round(generated, &mut out)?,
        }

        for ev in &out.events {
            self.recorder.record(&Observation::Transmission(ev));
        }
        for d in &out.delivered {
            self.recorder.record(&Observation::Delivered {
                hops: d.hops,
                event_labeled: self.labeled.contains(&d.reading.source),
            });
        }
        self.record(Observation::Lost { count: out.lost });

        for (i, was_alive) in alive_before.into_iter().enumerate() {
            if was_alive && !self.energy[i].alive {
                out.died.push(NodeId(i));
                self.record(Observation::NodeDied {
                    node: NodeId(i),
                    round,
                });
            }
        }
        if !out.died.is_empty() {
            self.topology.refresh_routes();
        }
        self.record(Observation::RoundCompleted);
        self.round += 1;
        Ok(Some(out))
    }

    fn framework_round(
        &mut self,
        generated: Vec<SensorReading>,
        out: &mut RoundOutput,
    ) -> Result<()> {
        let round = self.round;
        let mut events = Vec::new();
        let mut lost = 0usize;
        let link = self.link();
        let mut hops_so_far: BTreeMap<NodeId, usize> = BTreeMap::new();
        let absorb = |d: Dispatch, events: &mut Vec<TransmissionEvent>, lost: &mut usize| {
            events.extend(d.events);
            *lost += d.lost.len();
            d.delivered
        };

        // sensors -> aggregators
        let mut inbox: BTreeMap<NodeId, Vec<SensorReading>> = BTreeMap::new();
        for r in canonical_order(generated) {
            let Some(route) = self
                .topology
                .cached_collector_route(r.source)
                .map(<[NodeId]>::to_vec)
            else {
                lost += 1;
                continue;
            };
            let d = send_along(&route, &[r], &mut self.topology, &mut self.energy, link)?;
            for del in absorb(d, &mut events, &mut lost) {
                hops_so_far.insert(del.reading.source, del.hops);
                inbox
                    .entry(*route.last().unwrap())
                    .or_default()
                    .push(del.reading);
            }
        }

        // aggregators -> sub-sink
        let mut at_sub_sink = Vec::new();
        let aggregators = self.topology.aggregators().to_vec();
        for agg in aggregators {
            let incoming = inbox.remove(&agg).unwrap_or_default();
            if !self.topology.is_alive(agg) {
                lost += incoming.len();
                continue;
            }
            let mut snapshot = collect_round(incoming, round)?;
            if self.cfg.dedup_enabled {
                let index = self.suppression.entry(agg).or_default();
                snapshot = deduplicate(snapshot, self.cfg.dedup_eps, index);
            }
            self.record(Observation::Deduplicated {
                retained: snapshot.readings.len(),
            });
            if snapshot.readings.is_empty() {
                continue;
            }
            let Some(route) = self
                .topology
                .cached_collector_route(agg)
                .map(<[NodeId]>::to_vec)
            else {
                lost += snapshot.readings.len();
                continue;
            };
            let d = send_along(
                &route,
                &snapshot.readings,
                &mut self.topology,
                &mut self.energy,
                link,
            )?;
            for del in absorb(d, &mut events, &mut lost) {
                *hops_so_far.get_mut(&del.reading.source).unwrap() += del.hops;
                at_sub_sink.push(del.reading);
            }
        }
        debug_assert!(inbox.is_empty());

        // staircase at the sub-sink, then on to the sink
        let sub = self.topology.sub_sink().expect("checked at construction");
        if !self.topology.is_alive(sub) {
            lost += at_sub_sink.len();
        } else {
            let context = canonical_order(at_sub_sink);
            let result = {
                let ctx = StageContext {
                    cfg: &self.cfg.pipeline,
                    history: &self.history,
                    round_context: &context,
                    neighborhood: &self.topology,
                    model: self.model.as_ref(),
                };
                self.staircase.run(context.clone(), &ctx)?
            };
            for r in &result.intelligent {
                self.history
                    .push(r.source, r.value, self.cfg.pipeline.window_w);
            }
            if let Some(examples) = self.training.as_mut() {
                for r in &result.intelligent {
                    let label = if self.labeled.contains(&r.source) {
                        Label::Forward
                    } else {
                        Label::Discard
                    };
                    examples.push((features(r, &self.cfg.pipeline), label));
                }
            }
            self.recorder.record(&Observation::Pipeline(&result.trace));
            out.trace = Some(result.trace);

            if !result.intelligent.is_empty() {
                match self
                    .topology
                    .cached_collector_route(sub)
                    .map(<[NodeId]>::to_vec)
                {
                    None => lost += result.intelligent.len(),
                    Some(route) => {
                        let d = send_along(
                            &route,
                            &result.intelligent,
                            &mut self.topology,
                            &mut self.energy,
                            link,
                        )?;
                        for mut del in absorb(d, &mut events, &mut lost) {
                            del.hops += hops_so_far[&del.reading.source];
                            out.delivered.push(del);
                        }
                    }
                }
            }
        }
        out.events = events;
        out.lost = lost;
        Ok(())
    }

    /// Runs every remaining round and finalises the report.
    pub fn run_to_end(mut self) -> Result<RunOutcome> {
        let mut events = Vec::new();
        let mut delivered = Vec::new();
        while let Some(out) = self.step_round()? {
            events.extend(out.events);
            delivered.extend(out.delivered);
        }
        let report = self.recorder.finalize(&self.energy);
        Ok(RunOutcome {
            report,
            events,
            delivered,
            energy: self.energy,
            training: self.training,
        })
    }
}

/// A finished run with the raw material behind its report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub events: Vec<TransmissionEvent>,
    pub delivered: Vec<Delivery>,
    pub energy: Vec<EnergyState>,
    training: Option<Vec<(FeatureVector, Label)>>,
}

/// Result of the labelled warm-up run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub model: ClassifierModel,
    pub examples: Vec<(FeatureVector, Label)>,
    pub accuracy: f64,
}

/// Collects labelled review survivors from a framework-mode warm-up run of
/// the same scenario under a derived seed.
pub fn warmup_examples(cfg: &ScenarioConfig) -> Result<Vec<(FeatureVector, Label)>> {
    let warm = ScenarioConfig {
        seed: stream_seed(cfg.seed, Stream::Warmup),
        rounds: cfg.warmup_rounds,
        mode: Mode::Framework,
        ..cfg.clone()
    };
    let outcome = Simulation::new(warm, None)?.into_warmup().run_to_end()?;
    Ok(outcome.training.unwrap_or_default())
}

/// Warm-up run followed by perceptron training.
pub fn train_from_warmup(cfg: &ScenarioConfig) -> Result<TrainingOutcome> {
    let examples = warmup_examples(cfg)?;
    let model = train_classifier(&examples)?;
    let accuracy = training_accuracy(&model, &examples).unwrap_or(1.0);
    Ok(TrainingOutcome {
        model,
        examples,
        accuracy,
    })
}

/// Picks the classifier a framework run will use: the supplied one, none
/// when the rescue rule alone decides, or one trained on a warm-up run.
/// A warm-up with no examples falls back to the zero model.
pub fn resolve_model(
    cfg: &ScenarioConfig,
    model: Option<ClassifierModel>,
) -> Result<Option<ClassifierModel>> {
    if model.is_some() || cfg.mode == Mode::Baseline || cfg.pipeline.symbolic_only {
        return Ok(model);
    }
    match train_from_warmup(cfg) {
        Ok(t) => Ok(Some(t.model)),
        Err(Error::EmptyTrainingSet) => Ok(Some(ClassifierModel::zero())),
        Err(e) => Err(e),
    }
}

pub fn run_detailed(cfg: &ScenarioConfig, model: Option<ClassifierModel>) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = resolve_model(cfg, model)?;
    Simulation::new(cfg.clone(), model)?.run_to_end()
}

pub fn run_with_model(
    cfg: &ScenarioConfig,
    model: Option<ClassifierModel>,
) -> Result<MetricsReport> {
    Ok(run_detailed(cfg, model)?.report)
}

/// Builds the network, trains a classifier if needed, and runs to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport> {
    run_with_model(cfg, None)
}
