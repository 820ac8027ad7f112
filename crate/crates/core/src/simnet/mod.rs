//! Deterministic heartbeat simulation.
//!
//! Heartbeat traces with normally distributed inter-arrival times, a burst
//! packet-loss model, and a discrete-event scheduler with crash injection.
//! Every random choice is driven by an explicit seed.

mod loss;
mod sched;
mod trace;

use thiserror::Error;

pub use loss::{apply_burst_loss, BurstLossModel, BurstLossProcess};
pub use sched::{
    read_log, run_simulation, write_log, DeliveryHandler, EventHandler, EventKind, LogRecord, NodeId, SimContext,
    SimEvent, Simulation,
};
pub use trace::{generate_heartbeat_trace, to_millis, IntervalSampler, TraceHeartbeat, TraceSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid {field}: {msg}")]
    InvalidSpec { field: String, msg: String },
    #[error("event at {time} scheduled in the past (now {now})")]
    InPast { time: f64, now: f64 },
    #[error("{0}")]
    Handler(String),
}
