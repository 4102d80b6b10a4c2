//! Run measurements and their CSV / JSON renderings.
//!
//! CSV column order (one header row, one data row):
//!
//! ```text
//! mode, rounds_completed, readings_generated, readings_after_dedup,
//! readings_after_priority, readings_after_opinion, readings_after_review,
//! readings_after_sentiment, readings_delivered_to_sink,
//! readings_lost_in_transit, total_bits_transmitted, total_energy_consumed,
//! first_node_death_round, network_death_round, selectivity, mean_hop_count,
//! event_recall, false_forward_rate, per_node_energy_remaining
//! ```
//!
//! Ratios with a zero denominator are written as `undefined`, lifetimes that
//! never happened as `none`, and `per_node_energy_remaining` is a
//! `;`-separated list in node-id order with `inf` for the sink. In JSON,
//! undefined values are omitted and the sink's energy is `null`.

use serde::{Deserialize, Serialize};

use crate::dissemination::TransmissionEvent;
use crate::energy::EnergyState;
use crate::model::{NodeId, Round};
use crate::pipeline::StageTrace;
use crate::scenario::Mode;

pub const CSV_COLUMNS: [&str; 19] = [
    "mode",
    "rounds_completed",
    "readings_generated",
    "readings_after_dedup",
    "readings_after_priority",
    "readings_after_opinion",
    "readings_after_review",
    "readings_after_sentiment",
    "readings_delivered_to_sink",
    "readings_lost_in_transit",
    "total_bits_transmitted",
    "total_energy_consumed",
    "first_node_death_round",
    "network_death_round",
    "selectivity",
    "mean_hop_count",
    "event_recall",
    "false_forward_rate",
    "per_node_energy_remaining",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportMode {
    Baseline,
    Framework,
}

impl From<Mode> for ReportMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Baseline => ReportMode::Baseline,
            Mode::Framework => ReportMode::Framework,
        }
    }
}

impl ReportMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportMode::Baseline => "baseline",
            ReportMode::Framework => "framework",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: ReportMode,
    pub rounds_completed: u64,
    pub readings_generated: u64,
    pub readings_after_dedup: u64,
    pub readings_after_each_stage: [u64; 4],
    pub readings_delivered_to_sink: u64,
    pub readings_lost_in_transit: u64,
    pub total_bits_transmitted: u64,
    /// Joules drawn from finite batteries.
    pub total_energy_consumed: f64,
    /// `None` marks the infinite-budget sink.
    pub per_node_energy_remaining: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_node_death_round: Option<Round>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_death_round: Option<Round>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selectivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_hop_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_forward_rate: Option<f64>,
}

/// Everything the simulation reports to the recorder.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Generated {
        event_labeled: bool,
    },
    /// Readings an aggregator retained after redundancy removal.
    Deduplicated {
        retained: usize,
    },
    /// Readings that bypass aggregation and filtering (baseline mode).
    Unfiltered {
        count: usize,
    },
    Pipeline(&'a StageTrace),
    Transmission(&'a TransmissionEvent),
    Delivered {
        hops: usize,
        event_labeled: bool,
    },
    Lost {
        count: usize,
    },
    NodeDied {
        node: NodeId,
        round: Round,
    },
    RoundCompleted,
    NetworkDied {
        round: Round,
    },
}

/// Fixed-point joule accumulator so totals do not depend on event order.
const ENERGY_SCALE: f64 = 1e24;

fn to_fixed(joules: f64) -> i128 {
    (joules * ENERGY_SCALE).round() as i128
}

/// Order-independent accumulator behind [`MetricsReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecorder {
    mode: ReportMode,
    rounds_completed: u64,
    generated: u64,
    generated_event: u64,
    after_dedup: u64,
    after_stage: [u64; 4],
    delivered: u64,
    delivered_event: u64,
    hop_sum: u64,
    lost: u64,
    bits: u64,
    energy_fixed: i128,
    first_death: Option<Round>,
    network_death: Option<Round>,
}

impl MetricsRecorder {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode: mode.into(),
            rounds_completed: 0,
            generated: 0,
            generated_event: 0,
            after_dedup: 0,
            after_stage: [0; 4],
            delivered: 0,
            delivered_event: 0,
            hop_sum: 0,
            lost: 0,
            bits: 0,
            energy_fixed: 0,
            first_death: None,
            network_death: None,
        }
    }

    pub fn record(&mut self, obs: &Observation<'_>) {
        match *obs {
            Observation::Generated { event_labeled } => {
                self.generated += 1;
                self.generated_event += u64::from(event_labeled);
            }
            Observation::Deduplicated { retained } => self.after_dedup += retained as u64,
            Observation::Unfiltered { count } => {
                self.after_dedup += count as u64;
                for c in &mut self.after_stage {
                    *c += count as u64;
                }
            }
            Observation::Pipeline(trace) => {
                for (c, out) in self.after_stage.iter_mut().zip(trace.outputs) {
                    *c += out as u64;
                }
            }
            Observation::Transmission(ev) => {
                self.bits += ev.packet.bits;
                self.energy_fixed += to_fixed(ev.tx_charged) + to_fixed(ev.rx_charged);
            }
            Observation::Delivered {
                hops,
                event_labeled,
            } => {
                self.delivered += 1;
                self.delivered_event += u64::from(event_labeled);
                self.hop_sum += hops as u64;
            }
            Observation::Lost { count } => self.lost += count as u64,
            Observation::NodeDied { round, .. } => {
                self.first_death = Some(self.first_death.map_or(round, |r| r.min(round)));
            }
            Observation::RoundCompleted => self.rounds_completed += 1,
            Observation::NetworkDied { round } => {
                self.network_death = Some(self.network_death.map_or(round, |r| r.min(round)));
            }
        }
    }

    pub fn total_energy_consumed(&self) -> f64 {
        self.energy_fixed as f64 / ENERGY_SCALE
    }

    /// Computes derived ratios; zero denominators yield `None`.
    pub fn finalize(&self, energy: &[EnergyState]) -> MetricsReport {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        MetricsReport {
            mode: self.mode,
            rounds_completed: self.rounds_completed,
            readings_generated: self.generated,
            readings_after_dedup: self.after_dedup,
            readings_after_each_stage: self.after_stage,
            readings_delivered_to_sink: self.delivered,
            readings_lost_in_transit: self.lost,
            total_bits_transmitted: self.bits,
            total_energy_consumed: self.total_energy_consumed(),
            per_node_energy_remaining: energy
                .iter()
                .map(|e| e.is_finite().then_some(e.remaining))
                .collect(),
            first_node_death_round: self.first_death,
            network_death_round: self.network_death,
            selectivity: ratio(self.delivered, self.generated),
            mean_hop_count: ratio(self.hop_sum, self.delivered),
            event_recall: ratio(self.delivered_event, self.generated_event),
            false_forward_rate: ratio(self.delivered - self.delivered_event, self.delivered),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected `csv` or `json`, got `{other}`")),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn opt<T: ToString>(v: Option<T>, missing: &str) -> String {
    v.map_or_else(|| missing.to_string(), |x| x.to_string())
}

impl MetricsReport {
    pub fn csv_row(&self) -> Vec<String> {
        let stage = self.readings_after_each_stage;
        vec![
            self.mode.as_str().to_string(),
            self.rounds_completed.to_string(),
            self.readings_generated.to_string(),
            self.readings_after_dedup.to_string(),
            stage[0].to_string(),
            stage[1].to_string(),
            stage[2].to_string(),
            stage[3].to_string(),
            self.readings_delivered_to_sink.to_string(),
            self.readings_lost_in_transit.to_string(),
            self.total_bits_transmitted.to_string(),
            self.total_energy_consumed.to_string(),
            opt(self.first_node_death_round, "none"),
            opt(self.network_death_round, "none"),
            opt(self.selectivity, "undefined"),
            opt(self.mean_hop_count, "undefined"),
            opt(self.event_recall, "undefined"),
            opt(self.false_forward_rate, "undefined"),
            self.per_node_energy_remaining
                .iter()
                .map(|e| opt(*e, "inf"))
                .collect::<Vec<_>>()
                .join(";"),
        ]
    }

    pub fn serialize(&self, format: Format) -> String {
        match format {
            Format::Csv => format!("{}\n{}\n", CSV_COLUMNS.join(","), self.csv_row().join(",")),
            Format::Json => {
                let mut s =
                    serde_json::to_string_pretty(self).expect("report is always serializable");
                s.push('\n');
                s
            }
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// One line of a baseline-versus-framework comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub baseline: Option<f64>,
    pub framework: Option<f64>,
    /// framework / baseline, when both are defined and the baseline is non-zero.
    pub ratio: Option<f64>,
}

type MetricPick = (&'static str, fn(&MetricsReport) -> Option<f64>);

pub fn compare_reports(baseline: &MetricsReport, framework: &MetricsReport) -> Vec<ComparisonRow> {
    let pick: [MetricPick; 5] = [
        ("total_bits_transmitted", |r| {
            Some(r.total_bits_transmitted as f64)
        }),
        ("total_energy_consumed", |r| Some(r.total_energy_consumed)),
        ("readings_delivered_to_sink", |r| {
            Some(r.readings_delivered_to_sink as f64)
        }),
        ("first_node_death_round", |r| {
            r.first_node_death_round.map(|x| x as f64)
        }),
        ("network_death_round", |r| {
            r.network_death_round.map(|x| x as f64)
        }),
    ];
    pick.iter()
        .map(|(metric, f)| {
            let (b, fw) = (f(baseline), f(framework));
            let ratio = match (b, fw) {
                (Some(b), Some(fw)) if b != 0.0 => Some(fw / b),
                _ => None,
            };
            ComparisonRow {
                metric,
                baseline: b,
                framework: fw,
                ratio,
            }
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("metric,baseline,framework,ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.metric,
            opt(row.baseline, "none"),
            opt(row.framework, "none"),
            opt(row.ratio, "undefined"),
        ));
    }
    out
}
