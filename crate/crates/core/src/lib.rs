//! Round-based wireless sensor network simulator comparing a forward-everything
//! baseline against in-network aggregation plus a four-stage staircase filter
//! (priority, opinion, review, sentiment) running at a sub-sink.

pub mod aggregation;
pub mod cli;
pub mod dissemination;
pub mod energy;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod topology;

pub use error::{Error, Result};
pub use metrics::{Format, MetricsReport};
pub use scenario::{parse_scenario, Mode, ScenarioConfig};
