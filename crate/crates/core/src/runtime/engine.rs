use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::choreography::InteractionDescriptor;
use crate::detectors::{Detector, DetectorConfig, DetectorKind, FailureDetector, HeartbeatSample};

use super::RuntimeError;

/// Simulated device logic, chosen per offering category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Holds a state set by stimuli and pushes it to every output target
    /// when it changes, when routing changes, and optionally periodically.
    Source {
        #[serde(default = "false_value")]
        initial: Value,
        #[serde(default)]
        emit_period: Option<f64>,
    },
    /// Records the latest complete input.
    Sink,
    /// Forwards complete inputs unchanged.
    #[default]
    Passthrough,
}

fn false_value() -> Value {
    Value::Bool(false)
}

/// A message an engine wants delivered to a peer input port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outgoing {
    pub from_port: String,
    pub to_offering: String,
    pub to_port: String,
    pub value: Value,
}

/// Sent to the controller when a monitored peer starts being suspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNotice {
    pub monitor: String,
    pub monitored: String,
    pub suspicion: f64,
    /// Simulated seconds.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMonitor {
    pub config: DetectorConfig,
    pub detector: Detector,
    /// Verdict at the previous tick; notifications fire on false → true.
    pub suspected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub offering_id: String,
    pub behavior: Behavior,
    pub indes: Option<InteractionDescriptor>,
    /// Latest value per bound input port since the last computation.
    pub buffer: BTreeMap<String, Value>,
    /// One detector per monitoring entry of the current descriptor.
    pub monitors: BTreeMap<String, LinkMonitor>,
    /// Current state (sources) or last computed value.
    pub value: Value,
    pub next_seq: u64,
}

impl EngineState {
    pub fn new(offering_id: impl Into<String>, behavior: Behavior) -> Self {
        let value = match &behavior {
            Behavior::Source { initial, .. } => initial.clone(),
            _ => Value::Null,
        };
        Self {
            offering_id: offering_id.into(),
            behavior,
            indes: None,
            buffer: BTreeMap::new(),
            monitors: BTreeMap::new(),
            value,
            next_seq: 0,
        }
    }

    fn bound_ports(&self) -> BTreeSet<&str> {
        self.indes.iter().flat_map(|d| d.inputs.iter().map(|b| b.port.as_str())).collect()
    }

    /// Installs a new descriptor. Detectors of peers that stay monitored
    /// with the same configuration keep their learned state. Sources
    /// announce their current state to the (possibly new) targets.
    pub fn apply_descriptor(&mut self, indes: InteractionDescriptor) -> Result<Vec<Outgoing>, RuntimeError> {
        if indes.offering_id != self.offering_id {
            return Err(RuntimeError::Routing {
                offering: self.offering_id.clone(),
                msg: format!("received the descriptor of `{}`", indes.offering_id),
            });
        }
        let mut monitors = BTreeMap::new();
        for entry in &indes.monitoring {
            let kept = self.monitors.remove(&entry.monitored).filter(|m| m.config == entry.config);
            let monitor = match kept {
                Some(m) => m,
                None => LinkMonitor {
                    config: entry.config,
                    detector: Detector::new(DetectorKind::Iota, entry.config)?,
                    suspected: false,
                },
            };
            monitors.insert(entry.monitored.clone(), monitor);
        }
        self.monitors = monitors;
        self.indes = Some(indes);
        let bound: BTreeSet<String> = self.bound_ports().into_iter().map(str::to_string).collect();
        self.buffer.retain(|p, _| bound.contains(p));
        Ok(match self.behavior {
            Behavior::Source { .. } => self.emit(self.value.clone()),
            _ => Vec::new(),
        })
    }

    fn emit(&self, value: Value) -> Vec<Outgoing> {
        self.indes
            .iter()
            .flat_map(|d| d.outputs.iter())
            .map(|t| Outgoing {
                from_port: t.port.clone(),
                to_offering: t.to_offering.clone(),
                to_port: t.to_port.clone(),
                value: value.clone(),
            })
            .collect()
    }

    /// External event on a source (e.g. a button press).
    pub fn stimulus(&mut self, value: Value) -> Vec<Outgoing> {
        self.value = value.clone();
        self.emit(value)
    }

    /// Periodic re-announcement of a source's state.
    pub fn periodic_emit(&self) -> Vec<Outgoing> {
        self.emit(self.value.clone())
    }

    /// Records a heartbeat from `from` if this engine monitors it.
    pub fn record_heartbeat(&mut self, from: &str, hb: &HeartbeatSample) -> Result<bool, RuntimeError> {
        match self.monitors.get_mut(from) {
            Some(m) => {
                m.detector.record_heartbeat(hb)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn next_heartbeat_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }
}

/// Buffers `value` on `port`; once every bound input holds a value, runs
/// the offering's behavior, clears the buffer and returns one message per
/// output target.
pub fn engine_process_input(engine: &mut EngineState, port: &str, value: Value) -> Result<Vec<Outgoing>, RuntimeError> {
    if engine.indes.is_none() {
        return Err(RuntimeError::Routing {
            offering: engine.offering_id.clone(),
            msg: "no descriptor installed".into(),
        });
    }
    let bound: Vec<String> = engine.bound_ports().into_iter().map(str::to_string).collect();
    if !bound.iter().any(|p| p == port) {
        return Err(RuntimeError::Routing {
            offering: engine.offering_id.clone(),
            msg: format!("input port `{port}` is not bound"),
        });
    }
    engine.buffer.insert(port.to_string(), value);
    if bound.iter().any(|p| !engine.buffer.contains_key(p)) {
        return Ok(Vec::new());
    }
    let inputs = std::mem::take(&mut engine.buffer);
    let result = if inputs.len() == 1 {
        inputs.into_values().next().expect("one input")
    } else {
        Value::Array(inputs.into_values().collect())
    };
    engine.value = result.clone();
    Ok(engine.emit(result))
}

/// Evaluates every monitored peer at `now` (simulated seconds) and reports
/// each peer whose verdict just turned to suspected.
pub fn engine_monitor_tick(engine: &mut EngineState, now: f64) -> Vec<FailureNotice> {
    let now_ms = now * 1000.0;
    let mut out = Vec::new();
    for (peer, m) in engine.monitors.iter_mut() {
        // no heartbeat yet: nothing to judge
        let Ok(level) = m.detector.suspicion(now_ms) else { continue };
        let suspected = level >= m.config.threshold;
        if suspected && !m.suspected {
            out.push(FailureNotice {
                monitor: engine.offering_id.clone(),
                monitored: peer.clone(),
                suspicion: level,
                timestamp: now,
            });
        }
        m.suspected = suspected;
    }
    out
}
