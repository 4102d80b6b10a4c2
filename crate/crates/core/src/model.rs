//! Shared domain vocabulary: node identities and roles, sensor readings with
//! their per-stage annotations, and packets sized for energy billing.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Bits of header carried by every packet.
pub const HEADER_BITS: u64 = 64;
/// Bits per reading carried in a packet payload.
pub const READING_BITS: u64 = 64;

/// Round index of the lock-step simulation.
pub type Round = u64;

/// Dense node identifier, `0..N` within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Sensor,
    Aggregator,
    SubSink,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: NodeRole,
    pub position: Position,
}

/// The four filter stages, in the only order they may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageName {
    Priority,
    Opinion,
    Review,
    Sentiment,
}

impl StageName {
    pub const ALL: [StageName; 4] = [
        StageName::Priority,
        StageName::Opinion,
        StageName::Review,
        StageName::Sentiment,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Priority => "priority",
            StageName::Opinion => "opinion",
            StageName::Review => "review",
            StageName::Sentiment => "sentiment",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Forward,
    Discard,
}

/// Scores and verdicts accumulated as a reading climbs the staircase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageAnnotation {
    pub priority_score: Option<f64>,
    pub opinion_deviation: Option<f64>,
    pub consensus_ratio: Option<f64>,
    pub class_label: Option<Label>,
    pub drop_stage: Option<StageName>,
}

/// One sample from one node. Readings are values: stages hand back annotated
/// copies rather than mutating in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub source: NodeId,
    pub round: Round,
    pub value: f64,
    pub annotations: StageAnnotation,
}

impl SensorReading {
    /// Panics if `value` is not finite; non-finite samples are a simulator bug.
    pub fn new(source: NodeId, round: Round, value: f64) -> Self {
        assert!(
            value.is_finite(),
            "sensor value must be finite, got {value}"
        );
        Self {
            source,
            round,
            value,
            annotations: StageAnnotation::default(),
        }
    }

    /// True when both readings are the same sample (source, round and value),
    /// regardless of annotations.
    pub fn same_sample(&self, other: &SensorReading) -> bool {
        self.source == other.source && self.round == other.round && self.value == other.value
    }

    pub fn sample_key(&self) -> (Round, NodeId, u64) {
        (self.round, self.source, self.value.to_bits())
    }

    pub fn with_annotations(mut self, annotations: StageAnnotation) -> Self {
        self.annotations = annotations;
        self
    }

    pub fn dropped_at(mut self, stage: StageName) -> Self {
        debug_assert!(self.annotations.drop_stage.is_none());
        self.annotations.drop_stage = Some(stage);
        self
    }

    pub fn canonical_cmp(&self, other: &SensorReading) -> Ordering {
        self.round
            .cmp(&other.round)
            .then(self.source.cmp(&other.source))
            .then(self.value.total_cmp(&other.value))
    }
}

/// Stable sort by `(round, source, value)`.
pub fn canonical_order(mut readings: Vec<SensorReading>) -> Vec<SensorReading> {
    readings.sort_by(SensorReading::canonical_cmp);
    readings
}

/// Header and per-reading sizes used to bill packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSizing {
    pub header_bits: u64,
    pub reading_bits: u64,
}

impl Default for PacketSizing {
    fn default() -> Self {
        Self {
            header_bits: HEADER_BITS,
            reading_bits: READING_BITS,
        }
    }
}

impl PacketSizing {
    pub fn bits(&self, n_readings: usize) -> u64 {
        self.header_bits + n_readings as u64 * self.reading_bits
    }
}

/// Packet size in bits under the default sizing.
pub fn packet_bits(n_readings: usize) -> u64 {
    PacketSizing::default().bits(n_readings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: Vec<SensorReading>,
    pub bits: u64,
}

impl Packet {
    pub fn new(
        src: NodeId,
        dst: NodeId,
        payload: Vec<SensorReading>,
        sizing: &PacketSizing,
    ) -> Self {
        debug_assert_ne!(src, dst);
        let bits = sizing.bits(payload.len());
        Self {
            src,
            dst,
            payload,
            bits,
        }
    }
}
