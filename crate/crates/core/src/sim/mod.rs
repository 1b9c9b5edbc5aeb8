//! Discrete-event simulation of the attenuator test bench.

mod attenuator;
mod calibration;
mod engine;
mod medium;
mod queue;
mod rng;
mod scenario;
mod series;
mod time;

pub use attenuator::{AttenuatorEdge, AttenuatorSchedule};
pub use calibration::{calibrate_connect, simulate_connect_means};
pub use engine::{
    device_port, measure_connect, measure_handover, trace_connect, trace_handover, Measurement,
    DEVICE_ID, HANDOVER_SETTLE_CYCLES,
};
pub use medium::{ChannelKind, Delivery, Medium};
pub use queue::EventQueue;
pub use rng::{key_index, DrawKey, KeyedRng, Purpose};
pub use scenario::{
    run_scenario, run_sweep, HandoverOrder, LossTimestamp, ScenarioConfig, ScenarioError,
    ScenarioKind, MAX_ATTENUATION_DB,
};
pub use series::{artifact_header, format_seconds, DurationSeries, TOOL_VERSION};
pub use time::{quantize_duration, Micros, SimTime, MICROS_PER_SEC, SAMPLE_PERIOD_US};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("event at {at} us scheduled before current time {now} us")]
    CausalityViolation { at: SimTime, now: SimTime },
}
