use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SimError;

pub type NodeId = String;

/// Event kinds. Declaration order is the tie-break priority for events
/// scheduled at the same instant: in-flight deliveries first, queries last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    HeartbeatDeliver,
    DataMessage,
    HeartbeatSend,
    Crash,
    Query,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HeartbeatDeliver => "heartbeat-deliver",
            EventKind::DataMessage => "data-message",
            EventKind::HeartbeatSend => "heartbeat-send",
            EventKind::Crash => "crash",
            EventKind::Query => "query",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<P> {
    pub time: f64,
    pub kind: EventKind,
    pub source: NodeId,
    pub target: NodeId,
    pub payload: P,
}

impl<P> SimEvent<P> {
    pub fn new(time: f64, kind: EventKind, source: impl Into<NodeId>, target: impl Into<NodeId>, payload: P) -> Self {
        Self { time, kind, source: source.into(), target: target.into(), payload }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: f64,
    pub kind: String,
    pub source: NodeId,
    pub target: NodeId,
    pub detail: String,
}

impl LogRecord {
    pub fn new(
        time: f64,
        kind: impl Into<String>,
        source: impl Into<NodeId>,
        target: impl Into<NodeId>,
        detail: impl Into<String>,
    ) -> Self {
        Self { time, kind: kind.into(), source: source.into(), target: target.into(), detail: detail.into() }
    }
}

/// Writes records as JSON lines.
pub fn write_log<W: Write>(mut out: W, log: &[LogRecord]) -> std::io::Result<()> {
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

struct Queued<P> {
    time: f64,
    kind: EventKind,
    order: u64,
    event: SimEvent<P>,
}

impl<P> Queued<P> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.kind.cmp(&other.kind)).then(self.order.cmp(&other.order))
    }
}

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Scheduler state visible to an [`EventHandler`].
pub struct SimContext<P> {
    now: f64,
    next_order: u64,
    queue: BinaryHeap<Queued<P>>,
    crashed: BTreeMap<NodeId, f64>,
    log: Vec<LogRecord>,
}

impl<P> SimContext<P> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn schedule(&mut self, event: SimEvent<P>) -> Result<(), SimError> {
        if !event.time.is_finite() || event.time < self.now {
            return Err(SimError::InPast { time: event.time, now: self.now });
        }
        let order = self.next_order;
        self.next_order += 1;
        self.queue.push(Queued { time: event.time, kind: event.kind, order, event });
        Ok(())
    }

    pub fn log(&mut self, record: LogRecord) {
        self.log.push(record);
    }

    pub fn crash_time(&self, node: &str) -> Option<f64> {
        self.crashed.get(node).copied()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.log
    }
}

/// Reacts to events popped by the scheduler.
pub trait EventHandler<P> {
    fn handle(&mut self, event: SimEvent<P>, ctx: &mut SimContext<P>) -> Result<(), SimError>;
}

/// Deterministic discrete-event loop.
///
/// Events pop in `(time, kind, insertion order)` order. Once a node has a
/// crash event at `T`, every event it sources with time `> T` is discarded.
pub struct Simulation<P> {
    ctx: SimContext<P>,
}

impl<P> Default for Simulation<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Simulation<P> {
    pub fn new() -> Self {
        Self {
            ctx: SimContext {
                now: 0.0,
                next_order: 0,
                queue: BinaryHeap::new(),
                crashed: BTreeMap::new(),
                log: Vec::new(),
            },
        }
    }

    pub fn schedule(&mut self, event: SimEvent<P>) -> Result<(), SimError> {
        self.ctx.schedule(event)
    }

    pub fn now(&self) -> f64 {
        self.ctx.now
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.ctx.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.ctx.log
    }

    /// Processes every event with time `<= until`. Once a node has crashed,
    /// later events it sourced are discarded, including deliveries still in
    /// flight.
    pub fn run_until<H: EventHandler<P>>(&mut self, until: f64, handler: &mut H) -> Result<(), SimError> {
        while let Some(next) = self.ctx.queue.peek() {
            if next.time > until {
                break;
            }
            let Queued { event, .. } = self.ctx.queue.pop().expect("peeked");
            self.ctx.now = event.time;
            if event.kind == EventKind::Crash {
                self.ctx.crashed.entry(event.source.clone()).or_insert(event.time);
            } else if self.ctx.crash_time(&event.source).is_some_and(|t| event.time > t) {
                continue;
            }
            handler.handle(event, &mut self.ctx)?;
        }
        self.ctx.now = self.ctx.now.max(until);
        Ok(())
    }
}

/// Zero-or-constant latency transport: each `heartbeat-send` becomes a
/// `heartbeat-deliver` to the same target after the link delay, and every
/// processed event is logged with its JSON payload as detail.
#[derive(Debug, Clone, Default)]
pub struct DeliveryHandler {
    /// Per-link constant delay keyed by (source, target).
    pub link_delay: BTreeMap<(NodeId, NodeId), f64>,
}

impl<P: Serialize + Clone> EventHandler<P> for DeliveryHandler {
    fn handle(&mut self, event: SimEvent<P>, ctx: &mut SimContext<P>) -> Result<(), SimError> {
        let detail = serde_json::to_string(&event.payload).unwrap_or_default();
        ctx.log(LogRecord::new(event.time, event.kind.as_str(), &event.source, &event.target, detail));
        if event.kind == EventKind::HeartbeatSend {
            let delay = self.link_delay.get(&(event.source.clone(), event.target.clone())).copied().unwrap_or(0.0);
            ctx.schedule(SimEvent { time: event.time + delay, kind: EventKind::HeartbeatDeliver, ..event })?;
        }
        Ok(())
    }
}

/// Runs `events` through `handler` up to `until` and returns the log.
pub fn run_simulation<P, H: EventHandler<P>>(
    events: Vec<SimEvent<P>>,
    until: f64,
    handler: &mut H,
) -> Result<Vec<LogRecord>, SimError> {
    let mut sim = Simulation::new();
    for e in events {
        sim.schedule(e)?;
    }
    sim.run_until(until, handler)?;
    Ok(sim.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heartbeats(src: &str, dst: &str, period: f64, count: usize, seq0: u64) -> Vec<SimEvent<u64>> {
        (0..count)
            .map(|i| SimEvent::new(i as f64 * period, EventKind::HeartbeatSend, src, dst, seq0 + i as u64))
            .collect()
    }

    #[test]
    fn empty_run_has_empty_log() {
        let log = run_simulation::<u64, _>(vec![], 100.0, &mut DeliveryHandler::default()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn crash_suppresses_later_events() {
        let mut events = heartbeats("a", "b", 1.0, 30, 0);
        events.push(SimEvent::new(10.0, EventKind::Crash, "a", "a", 0));
        let log = run_simulation(events, 100.0, &mut DeliveryHandler::default()).unwrap();
        assert!(log.iter().filter(|r| r.source == "a").all(|r| r.time <= 10.0));
        let delivered = log.iter().filter(|r| r.kind == "heartbeat-deliver").count();
        assert_eq!(delivered, 11);
        assert!(log.iter().any(|r| r.kind == "crash"));
    }

    #[test]
    fn ties_break_by_kind_then_insertion() {
        let events = vec![
            SimEvent::new(1.0, EventKind::Query, "q", "q", 1),
            SimEvent::new(1.0, EventKind::DataMessage, "x", "y", 2),
            SimEvent::new(1.0, EventKind::DataMessage, "x", "y", 3),
            SimEvent::new(0.5, EventKind::Crash, "z", "z", 4),
        ];
        let log = run_simulation(events, 2.0, &mut DeliveryHandler::default()).unwrap();
        let details: Vec<&str> = log.iter().map(|r| r.detail.as_str()).collect();
        assert_eq!(details, vec!["4", "2", "3", "1"]);
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut sim: Simulation<u64> = Simulation::new();
        sim.schedule(SimEvent::new(5.0, EventKind::Query, "a", "a", 0)).unwrap();
        sim.run_until(5.0, &mut DeliveryHandler::default()).unwrap();
        let err = sim.schedule(SimEvent::new(4.0, EventKind::Query, "a", "a", 0)).unwrap_err();
        assert!(matches!(err, SimError::InPast { .. }));
    }

    #[test]
    fn independent_pairs_compose() {
        let pair1 = heartbeats("a", "b", 0.7, 20, 0);
        let pair2 = heartbeats("c", "d", 1.3, 20, 100);
        let mut handler = DeliveryHandler::default();
        handler.link_delay.insert(("c".into(), "d".into()), 0.05);
        let alone1 = run_simulation(pair1.clone(), 50.0, &mut handler.clone()).unwrap();
        let alone2 = run_simulation(pair2.clone(), 50.0, &mut handler.clone()).unwrap();
        let both = run_simulation([pair1, pair2].concat(), 50.0, &mut handler).unwrap();
        let only = |src: &str, dst: &str| -> Vec<LogRecord> {
            both.iter().filter(|r| r.source == src && r.target == dst).cloned().collect()
        };
        assert_eq!(only("a", "b"), alone1);
        assert_eq!(only("c", "d"), alone2);
    }

    #[test]
    fn log_lines_roundtrip() {
        let log = run_simulation(heartbeats("a", "b", 1.0, 3, 0), 10.0, &mut DeliveryHandler::default()).unwrap();
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), log.len());
        assert_eq!(read_log(&text).unwrap(), log);
    }
}
