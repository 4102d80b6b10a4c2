//! Scenario definition and its line-based `key = value` text format.
//!
//! Blank lines are ignored and `#` starts a comment. Every key is optional;
//! missing keys take the defaults below. Unknown keys are rejected so that a
//! typo never silently falls back to a default.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `node_count` | 100 | number of nodes |
//! | `placement` | `grid` | `grid`, `uniform` or `explicit` |
//! | `grid_spacing` | 10 | metres between grid neighbours |
//! | `grid_columns` | 0 | grid width; 0 means `ceil(sqrt(node_count))` |
//! | `area_side` | 100 | side of the square used by `uniform` placement |
//! | `positions` | | `x,y; x,y; ...` for `explicit` placement |
//! | `comm_radius` | 15 | radio range in metres |
//! | `sink` | 0 | sink node id |
//! | `sub_sink` | `auto` | `auto` (node closest to the centroid), `none`, or an id |
//! | `aggregators` | | explicit comma-separated aggregator ids |
//! | `aggregator_every` | 0 | if > 0, every node with `id % k == k - 1` aggregates |
//! | `aggregator_count` | 9 | otherwise, aggregators nearest a square lattice of this many points |
//! | `rounds` | 200 | rounds to simulate |
//! | `seed` | 1 | run seed |
//! | `e_elec` | 5e-8 | J/bit electronics energy |
//! | `e_amp` | 1e-10 | J/bit/m² amplifier energy |
//! | `header_bits`, `reading_bits` | 64, 64 | packet sizing |
//! | `initial_energy` | 0.5 | J per non-sink node |
//! | `field_base` | 25 | baseline field value |
//! | `drift_amplitude`, `drift_period` | 2, 50 | sinusoidal drift |
//! | `noise_sigma` | 0.2 | gaussian sensing noise |
//! | `event_rate` | 0.1 | mean new events per round (Poisson) |
//! | `event_radius` | 15 | influence radius in metres |
//! | `event_magnitude` | 10 | value added inside an event |
//! | `event_duration` | 5 | rounds an event stays active |
//! | `dedup_enabled` | true | run redundancy removal at aggregators |
//! | `dedup_eps` | 0.1 | temporal suppression tolerance |
//! | `band_lo`, `band_hi` | 20, 30 | nominal band |
//! | `theta_p` | 0.1 | priority threshold |
//! | `window_w` | 4 | per-source history length |
//! | `delta_o` | 0.5 | informativeness threshold |
//! | `range_lo`, `range_hi` | -40, 85 | physically plausible range |
//! | `tau_r` | 2 | peer agreement tolerance |
//! | `quorum_q` | 0.3 | required peer agreement ratio |
//! | `rescue_score` | 1 | priority score that bypasses the classifier |
//! | `symbolic_only` | false | classify with the rescue rule alone |
//! | `warmup_rounds` | 50 | rounds of the labelled training run |
//! | `batch_cap` | 16 | readings per packet |
//! | `mode` | `framework` | `baseline` or `framework` |

use std::str::FromStr;

use crate::energy::RadioParams;
use crate::error::{Error, Result};
use crate::model::{NodeId, PacketSizing, Position};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Framework,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Framework => "framework",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "framework" => Ok(Mode::Framework),
            other => Err(format!("expected `baseline` or `framework`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Grid,
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubSinkChoice {
    Auto,
    Disabled,
    Node(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub base: f64,
    pub drift_amplitude: f64,
    pub drift_period: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventParams {
    pub rate: f64,
    pub radius: f64,
    pub magnitude: f64,
    pub duration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub placement: Placement,
    pub grid_spacing: f64,
    pub grid_columns: usize,
    pub area_side: f64,
    pub positions: Vec<Position>,
    pub comm_radius: f64,
    pub sink: NodeId,
    pub sub_sink: SubSinkChoice,
    pub aggregators: Vec<NodeId>,
    pub aggregator_every: usize,
    pub aggregator_count: usize,
    pub rounds: u64,
    pub seed: u64,
    pub radio: RadioParams,
    pub sizing: PacketSizing,
    pub initial_energy: f64,
    pub field: FieldParams,
    pub events: EventParams,
    pub dedup_enabled: bool,
    pub dedup_eps: f64,
    pub pipeline: PipelineConfig,
    pub warmup_rounds: u64,
    pub batch_cap: usize,
    pub mode: Mode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            node_count: 100,
            placement: Placement::Grid,
            grid_spacing: 10.0,
            grid_columns: 0,
            area_side: 100.0,
            positions: Vec::new(),
            comm_radius: 15.0,
            sink: NodeId(0),
            sub_sink: SubSinkChoice::Auto,
            aggregators: Vec::new(),
            aggregator_every: 0,
            aggregator_count: 9,
            rounds: 200,
            seed: 1,
            radio: RadioParams::default(),
            sizing: PacketSizing::default(),
            initial_energy: 0.5,
            field: FieldParams {
                base: 25.0,
                drift_amplitude: 2.0,
                drift_period: 50.0,
                noise_sigma: 0.2,
            },
            events: EventParams {
                rate: 0.1,
                radius: 15.0,
                magnitude: 10.0,
                duration: 5,
            },
            dedup_enabled: true,
            dedup_eps: 0.1,
            pipeline: PipelineConfig::default(),
            warmup_rounds: 50,
            batch_cap: 16,
            mode: Mode::Framework,
        }
    }
}

/// Every key accepted by [`parse_scenario`].
pub const SCENARIO_KEYS: &[&str] = &[
    "node_count",
    "placement",
    "grid_spacing",
    "grid_columns",
    "area_side",
    "positions",
    "comm_radius",
    "sink",
    "sub_sink",
    "aggregators",
    "aggregator_every",
    "aggregator_count",
    "rounds",
    "seed",
    "e_elec",
    "e_amp",
    "header_bits",
    "reading_bits",
    "initial_energy",
    "field_base",
    "drift_amplitude",
    "drift_period",
    "noise_sigma",
    "event_rate",
    "event_radius",
    "event_magnitude",
    "event_duration",
    "dedup_enabled",
    "dedup_eps",
    "band_lo",
    "band_hi",
    "theta_p",
    "window_w",
    "delta_o",
    "range_lo",
    "range_hi",
    "tau_r",
    "quorum_q",
    "rescue_score",
    "symbolic_only",
    "warmup_rounds",
    "batch_cap",
    "mode",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::InvalidValue {
        key: key.to_string(),
        reason: format!("{raw:?}: {e}"),
    })
}

fn real(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = value(key, raw)?;
    if !v.is_finite() {
        return Err(Error::InvalidValue {
            key: key.to_string(),
            reason: format!("{raw:?} is not finite"),
        });
    }
    Ok(v)
}

fn node_list(key: &str, raw: &str) -> Result<Vec<NodeId>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value::<usize>(key, s).map(NodeId))
        .collect()
}

fn position_list(key: &str, raw: &str) -> Result<Vec<Position>> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (x, y) = pair.split_once(',').ok_or_else(|| Error::InvalidValue {
                key: key.to_string(),
                reason: format!("expected `x,y`, got {pair:?}"),
            })?;
            Ok(Position::new(real(key, x.trim())?, real(key, y.trim())?))
        })
        .collect()
}

impl ScenarioConfig {
    /// Sets one key from its textual value. Returns `Ok(false)` if the key is unknown.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<bool> {
        let p = &mut self.pipeline;
        match key {
            "node_count" => self.node_count = value(key, raw)?,
            "placement" => {
                self.placement = match raw {
                    "grid" => Placement::Grid,
                    "uniform" => Placement::Uniform,
                    "explicit" => Placement::Explicit,
                    _ => {
                        return Err(Error::InvalidValue {
                            key: key.into(),
                            reason: format!("expected grid|uniform|explicit, got {raw:?}"),
                        })
                    }
                }
            }
            "grid_spacing" => self.grid_spacing = real(key, raw)?,
            "grid_columns" => self.grid_columns = value(key, raw)?,
            "area_side" => self.area_side = real(key, raw)?,
            "positions" => self.positions = position_list(key, raw)?,
            "comm_radius" => self.comm_radius = real(key, raw)?,
            "sink" => self.sink = NodeId(value(key, raw)?),
            "sub_sink" => {
                self.sub_sink = match raw {
                    "auto" => SubSinkChoice::Auto,
                    "none" => SubSinkChoice::Disabled,
                    id => SubSinkChoice::Node(NodeId(value(key, id)?)),
                }
            }
            "aggregators" => self.aggregators = node_list(key, raw)?,
            "aggregator_every" => self.aggregator_every = value(key, raw)?,
            "aggregator_count" => self.aggregator_count = value(key, raw)?,
            "rounds" => self.rounds = value(key, raw)?,
            "seed" => self.seed = value(key, raw)?,
            "e_elec" => self.radio.e_elec = real(key, raw)?,
            "e_amp" => self.radio.e_amp = real(key, raw)?,
            "header_bits" => self.sizing.header_bits = value(key, raw)?,
            "reading_bits" => self.sizing.reading_bits = value(key, raw)?,
            "initial_energy" => self.initial_energy = real(key, raw)?,
            "field_base" => self.field.base = real(key, raw)?,
            "drift_amplitude" => self.field.drift_amplitude = real(key, raw)?,
            "drift_period" => self.field.drift_period = real(key, raw)?,
            "noise_sigma" => self.field.noise_sigma = real(key, raw)?,
            "event_rate" => self.events.rate = real(key, raw)?,
            "event_radius" => self.events.radius = real(key, raw)?,
            "event_magnitude" => self.events.magnitude = real(key, raw)?,
            "event_duration" => self.events.duration = value(key, raw)?,
            "dedup_enabled" => self.dedup_enabled = value(key, raw)?,
            "dedup_eps" => self.dedup_eps = real(key, raw)?,
            "band_lo" => p.band_lo = real(key, raw)?,
            "band_hi" => p.band_hi = real(key, raw)?,
            "theta_p" => p.theta_p = real(key, raw)?,
            "window_w" => p.window_w = value(key, raw)?,
            "delta_o" => p.delta_o = real(key, raw)?,
            "range_lo" => p.range_lo = real(key, raw)?,
            "range_hi" => p.range_hi = real(key, raw)?,
            "tau_r" => p.tau_r = real(key, raw)?,
            "quorum_q" => p.quorum_q = real(key, raw)?,
            "rescue_score" => p.rescue_score = real(key, raw)?,
            "symbolic_only" => p.symbolic_only = value(key, raw)?,
            "warmup_rounds" => self.warmup_rounds = value(key, raw)?,
            "batch_cap" => self.batch_cap = value(key, raw)?,
            "mode" => self.mode = value(key, raw)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Checks cross-field constraints that single-key parsing cannot see.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.node_count < 2 {
            return bad(format!(
                "node_count must be at least 2, got {}",
                self.node_count
            ));
        }
        if self.sink.index() >= self.node_count {
            return bad(format!("sink {} is not a node id", self.sink));
        }
        if let SubSinkChoice::Node(id) = self.sub_sink {
            if id.index() >= self.node_count || id == self.sink {
                return bad(format!("sub_sink {id} must be a non-sink node id"));
            }
        }
        for a in &self.aggregators {
            if a.index() >= self.node_count
                || *a == self.sink
                || self.sub_sink == SubSinkChoice::Node(*a)
            {
                return bad(format!("aggregator {a} must be a sensor-eligible node id"));
            }
        }
        if self.placement == Placement::Explicit && self.positions.len() != self.node_count {
            return bad(format!(
                "explicit placement needs {} positions, got {}",
                self.node_count,
                self.positions.len()
            ));
        }
        if self.placement == Placement::Grid && self.grid_spacing <= 0.0 {
            return bad("grid_spacing must be positive".into());
        }
        if self.placement == Placement::Uniform && self.area_side <= 0.0 {
            return bad("area_side must be positive".into());
        }
        if self.comm_radius <= 0.0 {
            return bad("comm_radius must be positive".into());
        }
        if self.radio.e_elec <= 0.0 || self.radio.e_amp <= 0.0 {
            return bad("e_elec and e_amp must be positive".into());
        }
        if self.sizing.header_bits == 0 && self.sizing.reading_bits == 0 {
            return bad("packets must have a positive size".into());
        }
        if self.sizing.reading_bits == 0 {
            return bad("reading_bits must be positive".into());
        }
        if self.initial_energy <= 0.0 {
            return bad("initial_energy must be positive".into());
        }
        if self.field.noise_sigma < 0.0 {
            return bad("noise_sigma must be non-negative".into());
        }
        if self.field.drift_period <= 0.0 {
            return bad("drift_period must be positive".into());
        }
        if self.events.rate < 0.0 || self.events.radius < 0.0 {
            return bad("event_rate and event_radius must be non-negative".into());
        }
        if self.dedup_eps < 0.0 {
            return bad("dedup_eps must be non-negative".into());
        }
        if self.batch_cap == 0 {
            return bad("batch_cap must be positive".into());
        }
        self.pipeline.validate()
    }
}

/// Parses scenario text; missing keys keep their defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, val)) = line.split_once('=') else {
            return Err(Error::MalformedLine {
                line: line_no,
                text: raw_line.to_string(),
            });
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::MalformedLine {
                line: line_no,
                text: raw_line.to_string(),
            });
        }
        if !cfg.set(key, val.trim())? {
            return Err(Error::UnknownKey {
                key: key.to_string(),
                line: line_no,
            });
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
