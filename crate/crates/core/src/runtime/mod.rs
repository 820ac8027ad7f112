//! Controller and engines running inside the simulator.
//!
//! Offerings register with the controller, which selects them into recipe
//! configurations and distributes interaction descriptors. From then on the
//! engines route data and watch each other on their own; the controller is
//! only contacted again when an engine reports a suspected crash, at which
//! point it re-runs selection and redistributes descriptors.

mod controller;
mod engine;
mod scenario;

use thiserror::Error;

use crate::choreography::ChoreoError;
use crate::detectors::DetectorError;
use crate::simnet::SimError;

pub use controller::{ControllerState, Distribution, FailureOutcome};
pub use engine::{
    engine_monitor_tick, engine_process_input, Behavior, EngineState, FailureNotice, LinkMonitor, Outgoing,
};
pub use scenario::{
    measure_failover, run_scenario, Assertion, AssertionResult, CrashSpec, Message, Registration, Scenario,
    ScenarioOutcome, StateDump, StimulusSpec, CONTROLLER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("invalid scenario field `{field}`: {msg}")]
    InvalidScenario { field: String, msg: String },
    #[error("routing error at `{offering}`: {msg}")]
    Routing { offering: String, msg: String },
    #[error(transparent)]
    Choreo(#[from] ChoreoError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
