use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::choreography::{
    CategoryTaxonomy, InteractionDescriptor, Offering, Recipe, RecipeRuntimeConfiguration, RrcStatus,
};
use crate::detectors::{DetectorConfig, HeartbeatSample};
use crate::seed::derive_seed;
use crate::simnet::{to_millis, EventHandler, EventKind, LogRecord, SimContext, SimError, SimEvent, Simulation};

use super::controller::{ControllerState, FailureOutcome};
use super::engine::{engine_monitor_tick, engine_process_input, Behavior, EngineState, FailureNotice, Outgoing};
use super::RuntimeError;

pub const CONTROLLER: &str = "controller";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registration {
    pub time: f64,
    pub offering: Offering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub time: f64,
    pub offering: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub time: f64,
    pub offering: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    /// Every engine fed by `crashed` before its crash receives data from
    /// `replacement` within `within` seconds of the crash.
    FailoverWithin {
        crashed: String,
        replacement: String,
        within: f64,
    },
    /// Final value recorded by an engine.
    SinkValue {
        offering: String,
        value: Value,
    },
    /// Active RRCs satisfy their rules and bounds at the end of the run.
    AssignmentsValid,
    RrcStatus {
        rrc: String,
        status: RrcStatus,
    },
}

fn default_period() -> f64 {
    1.0
}

fn default_monitor_period() -> f64 {
    0.1
}

fn default_latency() -> f64 {
    0.01
}

/// A complete choreography run: world description, schedule and checks.
/// Times are simulated seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_period")]
    pub heartbeat_period: f64,
    /// Each heartbeat interval is the period plus uniform noise in ±jitter.
    #[serde(default)]
    pub heartbeat_jitter: f64,
    #[serde(default = "default_monitor_period")]
    pub monitor_period: f64,
    #[serde(default = "default_latency")]
    pub link_latency: f64,
    pub taxonomy: CategoryTaxonomy,
    pub recipes: Vec<Recipe>,
    pub rrcs: Vec<RecipeRuntimeConfiguration>,
    /// Behavior per category; an offering uses the entry of its own
    /// category, else of the first listed supercategory, else passthrough.
    #[serde(default)]
    pub behaviors: BTreeMap<String, Behavior>,
    #[serde(default)]
    pub default_detector: DetectorConfig,
    #[serde(default)]
    pub registrations: Vec<Registration>,
    #[serde(default)]
    pub crashes: Vec<CrashSpec>,
    #[serde(default)]
    pub stimuli: Vec<StimulusSpec>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |field: &str, msg: String| Err(RuntimeError::InvalidScenario { field: field.into(), msg });
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon", format!("must be > 0, got {}", self.horizon));
        }
        if !(self.heartbeat_period.is_finite() && self.heartbeat_period > 0.0) {
            return bad("heartbeat_period", format!("must be > 0, got {}", self.heartbeat_period));
        }
        if !(self.heartbeat_jitter >= 0.0 && self.heartbeat_jitter < self.heartbeat_period) {
            return bad(
                "heartbeat_jitter",
                format!("must lie in [0, heartbeat_period), got {}", self.heartbeat_jitter),
            );
        }
        if !(self.monitor_period.is_finite() && self.monitor_period > 0.0) {
            return bad("monitor_period", format!("must be > 0, got {}", self.monitor_period));
        }
        if !(self.link_latency.is_finite() && self.link_latency >= 0.0) {
            return bad("link_latency", format!("must be >= 0, got {}", self.link_latency));
        }
        let in_range = |t: f64| t.is_finite() && (0.0..=self.horizon).contains(&t);
        let mut known = BTreeSet::new();
        for (i, r) in self.registrations.iter().enumerate() {
            if !in_range(r.time) {
                return bad(&format!("registrations[{i}].time"), format!("{} outside [0, horizon]", r.time));
            }
            if r.offering.id == CONTROLLER {
                return bad(&format!("registrations[{i}].offering.id"), "reserved for the controller".into());
            }
            known.insert(r.offering.id.as_str());
        }
        for (i, c) in self.crashes.iter().enumerate() {
            if !in_range(c.time) {
                return bad(&format!("crashes[{i}].time"), format!("{} outside [0, horizon]", c.time));
            }
            if !known.contains(c.offering.as_str()) {
                return bad(&format!("crashes[{i}].offering"), format!("`{}` is never registered", c.offering));
            }
        }
        for (i, s) in self.stimuli.iter().enumerate() {
            if !in_range(s.time) {
                return bad(&format!("stimuli[{i}].time"), format!("{} outside [0, horizon]", s.time));
            }
            if !known.contains(s.offering.as_str()) {
                return bad(&format!("stimuli[{i}].offering"), format!("`{}` is never registered", s.offering));
            }
        }
        for (cat, b) in &self.behaviors {
            if !self.taxonomy.contains(cat) {
                return bad(&format!("behaviors.{cat}"), "unknown category".into());
            }
            if let Behavior::Source { emit_period: Some(p), .. } = b {
                if !(p.is_finite() && *p > 0.0) {
                    return bad(&format!("behaviors.{cat}.emit_period"), format!("must be > 0, got {p}"));
                }
            }
        }
        self.default_detector.validate().or_else(|e| bad("default_detector", e.to_string()))?;
        Ok(())
    }

    fn behavior_for(&self, category: &str) -> Behavior {
        if let Some(b) = self.behaviors.get(category) {
            return b.clone();
        }
        self.behaviors
            .iter()
            .find(|(cat, _)| self.taxonomy.is_a(category, cat).unwrap_or(false))
            .map(|(_, b)| b.clone())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Register { offering: Offering },
    Descriptor { indes: InteractionDescriptor },
    Data { from_port: String, to_port: String, value: Value },
    Heartbeat { seq: u64 },
    Failure { notice: FailureNotice },
    Stimulus { value: Value },
    Emit,
    Tick,
}

struct World<'a> {
    scenario: &'a Scenario,
    controller: ControllerState,
    engines: BTreeMap<String, EngineState>,
    jitter: BTreeMap<String, ChaCha8Rng>,
}

fn record(ctx: &mut SimContext<Message>, kind: &str, source: &str, target: &str, detail: impl Serialize) {
    let detail = serde_json::to_string(&detail).unwrap_or_default();
    ctx.log(LogRecord::new(ctx.now(), kind, source, target, detail));
}

impl World<'_> {
    fn send(
        &self,
        ctx: &mut SimContext<Message>,
        kind: EventKind,
        from: &str,
        to: &str,
        msg: Message,
    ) -> Result<(), SimError> {
        let t = ctx.now() + self.scenario.link_latency;
        if t <= self.scenario.horizon {
            ctx.schedule(SimEvent::new(t, kind, from, to, msg))?;
        }
        Ok(())
    }

    fn after(
        &self,
        ctx: &mut SimContext<Message>,
        delay: f64,
        kind: EventKind,
        node: &str,
        msg: Message,
    ) -> Result<(), SimError> {
        let t = ctx.now() + delay;
        if t <= self.scenario.horizon {
            ctx.schedule(SimEvent::new(t, kind, node, node, msg))?;
        }
        Ok(())
    }

    fn distribute(
        &self,
        ctx: &mut SimContext<Message>,
        descriptors: Vec<InteractionDescriptor>,
    ) -> Result<(), SimError> {
        for indes in descriptors {
            let to = indes.offering_id.clone();
            self.send(ctx, EventKind::DataMessage, CONTROLLER, &to, Message::Descriptor { indes })?;
        }
        Ok(())
    }

    fn dispatch(&self, ctx: &mut SimContext<Message>, from: &str, out: Vec<Outgoing>) -> Result<(), SimError> {
        for o in out {
            let msg = Message::Data { from_port: o.from_port, to_port: o.to_port, value: o.value };
            self.send(ctx, EventKind::DataMessage, from, &o.to_offering, msg)?;
        }
        Ok(())
    }

    fn next_interval(&mut self, id: &str) -> f64 {
        let (period, jitter) = (self.scenario.heartbeat_period, self.scenario.heartbeat_jitter);
        let rng = self.jitter.get_mut(id).expect("engine exists");
        if jitter > 0.0 {
            period + rng.random_range(-jitter..=jitter)
        } else {
            period
        }
    }

    fn start_engine(&mut self, ctx: &mut SimContext<Message>, offering: &Offering) -> Result<(), SimError> {
        if self.engines.contains_key(&offering.id) {
            return Ok(());
        }
        let behavior = self.scenario.behavior_for(&offering.category);
        let emit_period = match &behavior {
            Behavior::Source { emit_period, .. } => *emit_period,
            _ => None,
        };
        let id = offering.id.clone();
        self.engines.insert(id.clone(), EngineState::new(&id, behavior));
        let seed = derive_seed(self.scenario.seed, &format!("heartbeat/{id}"));
        self.jitter.insert(id.clone(), ChaCha8Rng::seed_from_u64(seed));
        let first = self.next_interval(&id);
        self.after(ctx, first, EventKind::HeartbeatSend, &id, Message::Tick)?;
        self.after(ctx, self.scenario.monitor_period, EventKind::Query, &id, Message::Tick)?;
        if let Some(p) = emit_period {
            self.after(ctx, p, EventKind::DataMessage, &id, Message::Emit)?;
        }
        Ok(())
    }

    fn on_controller(&mut self, ctx: &mut SimContext<Message>, source: &str, msg: Message) -> Result<(), SimError> {
        match msg {
            Message::Register { offering } => {
                record(ctx, "register", source, CONTROLLER, &offering);
                match self.controller.register_offering(offering.clone()) {
                    Ok(sent) => self.distribute(ctx, sent)?,
                    Err(e) => record(ctx, "warning", CONTROLLER, source, e.to_string()),
                }
            }
            Message::Failure { notice } => {
                record(ctx, "failure-notification", source, CONTROLLER, &notice);
                match self.controller.handle_failure_notification(&notice.monitored) {
                    Ok(FailureOutcome::Recovered(sent)) => {
                        let statuses: BTreeMap<&str, RrcStatus> =
                            self.controller.rrcs.iter().map(|(k, r)| (k.as_str(), r.status)).collect();
                        record(ctx, "recovery", CONTROLLER, &notice.monitored, &statuses);
                        self.distribute(ctx, sent)?;
                    }
                    Ok(FailureOutcome::Ignored(why)) => record(ctx, "warning", CONTROLLER, source, why),
                    Err(e) => record(ctx, "warning", CONTROLLER, source, e.to_string()),
                }
            }
            other => record(ctx, "warning", CONTROLLER, source, format!("unexpected message {other:?}")),
        }
        Ok(())
    }

    fn on_engine(&mut self, ctx: &mut SimContext<Message>, event: SimEvent<Message>) -> Result<(), SimError> {
        let (id, source) = (event.target.clone(), event.source.clone());
        if ctx.crash_time(&id).is_some_and(|t| ctx.now() >= t) {
            return Ok(());
        }
        if let Message::Register { offering } = &event.payload {
            // the engine comes up and announces itself
            self.start_engine(ctx, offering)?;
            return self.send(ctx, EventKind::DataMessage, &id, CONTROLLER, event.payload);
        }
        let Some(engine) = self.engines.get_mut(&id) else {
            record(ctx, "warning", &source, &id, "message for an engine that is not running");
            return Ok(());
        };
        match (event.kind, event.payload) {
            (EventKind::HeartbeatSend, _) => {
                let seq = engine.next_heartbeat_seq();
                let targets = engine.indes.as_ref().map(|d| d.heartbeat_targets.clone()).unwrap_or_default();
                for t in targets {
                    self.send(ctx, EventKind::HeartbeatDeliver, &id, &t, Message::Heartbeat { seq })?;
                }
                let next = self.next_interval(&id);
                self.after(ctx, next, EventKind::HeartbeatSend, &id, Message::Tick)?;
            }
            (EventKind::HeartbeatDeliver, Message::Heartbeat { seq }) => {
                let hb = HeartbeatSample::new(to_millis(ctx.now()), seq);
                match engine.record_heartbeat(&source, &hb) {
                    Ok(true) => record(ctx, "heartbeat", &source, &id, seq),
                    Ok(false) => {}
                    Err(e) => record(ctx, "warning", &source, &id, e.to_string()),
                }
            }
            (EventKind::Query, _) => {
                for notice in engine_monitor_tick(engine, ctx.now()) {
                    self.send(ctx, EventKind::DataMessage, &id, CONTROLLER, Message::Failure { notice })?;
                }
                self.after(ctx, self.scenario.monitor_period, EventKind::Query, &id, Message::Tick)?;
            }
            (_, Message::Descriptor { indes }) => {
                record(ctx, "indes", CONTROLLER, &id, &indes);
                match engine.apply_descriptor(indes) {
                    Ok(out) => self.dispatch(ctx, &id, out)?,
                    Err(e) => record(ctx, "warning", CONTROLLER, &id, e.to_string()),
                }
            }
            (_, Message::Data { from_port, to_port, value }) => {
                record(
                    ctx,
                    "data",
                    &source,
                    &id,
                    serde_json::json!({ "from_port": from_port, "to_port": to_port, "value": value }),
                );
                let is_sink = engine.behavior == Behavior::Sink;
                match engine_process_input(engine, &to_port, value) {
                    Ok(out) => {
                        if is_sink && engine.buffer.is_empty() {
                            record(ctx, "sink-update", &source, &id, &engine.value);
                        }
                        self.dispatch(ctx, &id, out)?;
                    }
                    Err(e) => record(ctx, "warning", &source, &id, e.to_string()),
                }
            }
            (_, Message::Stimulus { value }) => {
                record(ctx, "stimulus", &id, &id, &value);
                let out = engine.stimulus(value);
                self.dispatch(ctx, &id, out)?;
            }
            (_, Message::Emit) => {
                let out = engine.periodic_emit();
                let period = match &engine.behavior {
                    Behavior::Source { emit_period: Some(p), .. } => *p,
                    _ => return Ok(()),
                };
                self.dispatch(ctx, &id, out)?;
                self.after(ctx, period, EventKind::DataMessage, &id, Message::Emit)?;
            }
            (kind, payload) => {
                record(ctx, "warning", &source, &id, format!("unexpected {} {payload:?}", kind.as_str()));
            }
        }
        Ok(())
    }
}

impl EventHandler<Message> for World<'_> {
    fn handle(&mut self, event: SimEvent<Message>, ctx: &mut SimContext<Message>) -> Result<(), SimError> {
        if event.kind == EventKind::Crash {
            record(ctx, "crash", &event.source, &event.target, Value::Null);
            return Ok(());
        }
        if event.target == CONTROLLER {
            let source = event.source.clone();
            return self.on_controller(ctx, &source, event.payload);
        }
        self.on_engine(ctx, event)
    }
}

/// Final controller and engine state written after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub controller: ControllerState,
    /// Current value held by every engine.
    pub engine_values: BTreeMap<String, Value>,
    pub crashed: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub log: Vec<LogRecord>,
    pub state: StateDump,
    pub assertions: Vec<AssertionResult>,
}

impl ScenarioOutcome {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Seconds from the crash of `crashed` until every engine it used to feed has
/// received data from `replacement`; `Err` explains why that never happened.
pub fn measure_failover(log: &[LogRecord], crashed: &str, replacement: &str) -> Result<f64, String> {
    let crash_at = log
        .iter()
        .find(|r| r.kind == "crash" && r.source == crashed)
        .map(|r| r.time)
        .ok_or_else(|| format!("`{crashed}` never crashed"))?;
    let fed: BTreeSet<&str> = log
        .iter()
        .filter(|r| r.kind == "data" && r.source == crashed && r.time <= crash_at)
        .map(|r| r.target.as_str())
        .collect();
    if fed.is_empty() {
        return Err(format!("`{crashed}` fed no engine before crashing"));
    }
    let mut worst: f64 = 0.0;
    for target in fed {
        let t = log
            .iter()
            .find(|r| r.kind == "data" && r.source == replacement && r.target == target && r.time > crash_at)
            .map(|r| r.time)
            .ok_or_else(|| format!("`{target}` never received data from `{replacement}`"))?;
        worst = worst.max(t - crash_at);
    }
    Ok(worst)
}

fn check(assertion: &Assertion, log: &[LogRecord], state: &StateDump) -> AssertionResult {
    let (passed, detail) = match assertion {
        Assertion::FailoverWithin { crashed, replacement, within } => match measure_failover(log, crashed, replacement)
        {
            Ok(t) => (t <= *within, format!("failover took {t:.3} s (limit {within} s)")),
            Err(e) => (false, e),
        },
        Assertion::SinkValue { offering, value } => match state.engine_values.get(offering) {
            Some(v) => (v == value, format!("`{offering}` holds {v}")),
            None => (false, format!("`{offering}` has no engine")),
        },
        Assertion::AssignmentsValid => {
            let v = state.controller.violations();
            (v.is_empty(), if v.is_empty() { "all active assignments valid".into() } else { v.join("; ") })
        }
        Assertion::RrcStatus { rrc, status } => match state.controller.rrcs.get(rrc) {
            Some(r) => (r.status == *status, format!("`{rrc}` is {:?}", r.status)),
            None => (false, format!("unknown rrc `{rrc}`")),
        },
    };
    AssertionResult { assertion: assertion.clone(), passed, detail }
}

/// Runs the scenario to its horizon and evaluates its assertions.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, RuntimeError> {
    scenario.validate()?;
    let controller = ControllerState::new(
        scenario.taxonomy.clone(),
        scenario.recipes.clone(),
        scenario.rrcs.clone(),
        scenario.default_detector,
    )?;
    let mut world = World { scenario, controller, engines: BTreeMap::new(), jitter: BTreeMap::new() };
    let mut sim = Simulation::new();
    for r in &scenario.registrations {
        let id = &r.offering.id;
        sim.schedule(SimEvent::new(
            r.time,
            EventKind::DataMessage,
            id,
            id,
            Message::Register { offering: r.offering.clone() },
        ))?;
    }
    for s in &scenario.stimuli {
        sim.schedule(SimEvent::new(
            s.time,
            EventKind::DataMessage,
            &s.offering,
            &s.offering,
            Message::Stimulus { value: s.value.clone() },
        ))?;
    }
    for c in &scenario.crashes {
        sim.schedule(SimEvent::new(c.time, EventKind::Crash, &c.offering, &c.offering, Message::Tick))?;
    }
    sim.run_until(scenario.horizon, &mut world)?;
    let log = sim.into_log();
    let crashed: BTreeSet<String> = log.iter().filter(|r| r.kind == "crash").map(|r| r.source.clone()).collect();
    let state = StateDump {
        engine_values: world.engines.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect(),
        controller: world.controller,
        crashed,
    };
    let assertions = scenario.assertions.iter().map(|a| check(a, &log, &state)).collect();
    Ok(ScenarioOutcome { log, state, assertions })
}
