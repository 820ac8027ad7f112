//! Accrual failure detection and dynamic IoT choreographies.
//!
//! * [`detectors`] — iota, phi-accrual and adaptive failure detectors.
//! * [`simnet`] — deterministic heartbeat traces, burst loss and a
//!   discrete-event scheduler.
//! * [`qos`] — detection time, mistake rate and query accuracy, and
//!   threshold sweeps over the three detectors.
//! * [`choreography`] — recipes, offerings, selection rules, interaction
//!   descriptors and monitoring topology.
//! * [`runtime`] — controller and engine state machines running inside the
//!   simulator, including failure recovery.

pub mod choreography;
pub mod detectors;
pub mod qos;
pub mod runtime;
pub mod seed;
pub mod simnet;
