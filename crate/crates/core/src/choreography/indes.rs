use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;

use super::model::{port_mapping, PortMapping, Recipe, Registry};
use super::rrc::{RecipeRuntimeConfiguration, RrcStatus};
use super::ChoreoError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputBinding {
    /// Local input port.
    pub port: String,
    pub from_offering: String,
    pub from_port: String,
    pub rrc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputTarget {
    /// Local output port.
    pub port: String,
    pub to_offering: String,
    pub to_port: String,
    pub rrc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringEntry {
    pub monitored: String,
    pub config: DetectorConfig,
}

/// Everything an engine needs to run its part of the choreography without
/// the controller: where inputs come from, where outputs go, whom to watch
/// and whom to send heartbeats to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDescriptor {
    pub offering_id: String,
    pub inputs: Vec<InputBinding>,
    pub outputs: Vec<OutputTarget>,
    pub monitoring: Vec<MonitoringEntry>,
    /// Offerings that monitor this one.
    pub heartbeat_targets: Vec<String>,
}

impl InteractionDescriptor {
    pub fn empty(offering_id: impl Into<String>) -> Self {
        Self {
            offering_id: offering_id.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            monitoring: Vec::new(),
            heartbeat_targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    /// Receiver watches sender along a dataflow edge.
    Dataflow,
    /// Initial node of a chain watches its terminal node.
    Backlink,
    /// Idle offerings watch their successor by id.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringLink {
    pub monitor: String,
    pub monitored: String,
    pub config: DetectorConfig,
    pub origin: LinkOrigin,
}

struct Edge {
    from: String,
    from_port: String,
    to: String,
    to_port: String,
}

/// Offering-level dataflow of an RRC: each recipe interaction expanded over
/// the offerings assigned to both ends.
fn expand_edges(
    rrc: &RecipeRuntimeConfiguration,
    recipe: &Recipe,
    registry: &Registry,
) -> Result<Vec<Edge>, ChoreoError> {
    let mut mappings: BTreeMap<(&str, &str), PortMapping> = BTreeMap::new();
    for (ing_id, ids) in &rrc.assignment {
        let ing = recipe.ingredient(ing_id).ok_or_else(|| ChoreoError::InvalidRule {
            rrc: rrc.id.clone(),
            msg: format!("assignment for unknown ingredient `{ing_id}`"),
        })?;
        for id in ids {
            let offering = registry.get(id).ok_or_else(|| ChoreoError::UnknownOffering(id.clone()))?;
            let m = port_mapping(ing, offering).ok_or_else(|| ChoreoError::InvalidRule {
                rrc: rrc.id.clone(),
                msg: format!("`{id}` cannot fill the ports of `{ing_id}`"),
            })?;
            mappings.insert((ing_id, id), m);
        }
    }
    let none = BTreeSet::new();
    let mut edges = Vec::new();
    for int in &recipe.interactions {
        let senders = rrc.assignment.get(&int.from.ingredient).unwrap_or(&none);
        let receivers = rrc.assignment.get(&int.to.ingredient).unwrap_or(&none);
        for a in senders {
            for b in receivers.iter().filter(|b| *b != a) {
                edges.push(Edge {
                    from: a.clone(),
                    from_port: mappings[&(int.from.ingredient.as_str(), a.as_str())].outputs[&int.from.port].clone(),
                    to: b.clone(),
                    to_port: mappings[&(int.to.ingredient.as_str(), b.as_str())].inputs[&int.to.port].clone(),
                });
            }
        }
    }
    Ok(edges)
}

/// Dataflow links plus one backlink per (initial, terminal) chain pair.
fn rrc_links(rrc: &RecipeRuntimeConfiguration, edges: &[Edge]) -> Vec<MonitoringLink> {
    let link = |monitor: &str, monitored: &str, origin| MonitoringLink {
        monitor: monitor.to_string(),
        monitored: monitored.to_string(),
        config: rrc.failure_detection,
        origin,
    };
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut has_pred = BTreeSet::new();
    let mut links = Vec::new();
    let mut seen = BTreeSet::new();
    for e in edges {
        if seen.insert((e.from.as_str(), e.to.as_str())) {
            links.push(link(&e.to, &e.from, LinkOrigin::Dataflow));
            succ.entry(&e.from).or_default().insert(&e.to);
            has_pred.insert(e.to.as_str());
        }
    }
    for &source in succ.keys().filter(|s| !has_pred.contains(*s)) {
        let mut stack = vec![source];
        let mut visited = BTreeSet::new();
        let mut sinks = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !visited.insert(n) {
                continue;
            }
            match succ.get(n) {
                Some(next) => stack.extend(next.iter().copied()),
                None => {
                    sinks.insert(n);
                }
            }
        }
        links.extend(sinks.into_iter().map(|sink| link(source, sink, LinkOrigin::Backlink)));
    }
    links
}

/// Routing and monitoring for every offering of one active RRC.
pub fn generate_interaction_descriptors(
    rrc: &RecipeRuntimeConfiguration,
    recipe: &Recipe,
    registry: &Registry,
) -> Result<Vec<InteractionDescriptor>, ChoreoError> {
    if rrc.status != RrcStatus::Active {
        return Err(ChoreoError::Inactive(rrc.id.clone()));
    }
    let edges = expand_edges(rrc, recipe, registry)?;
    let mut out: BTreeMap<&str, InteractionDescriptor> =
        rrc.offerings().into_iter().map(|id| (id, InteractionDescriptor::empty(id))).collect();
    for e in &edges {
        out.get_mut(e.from.as_str()).expect("assigned").outputs.push(OutputTarget {
            port: e.from_port.clone(),
            to_offering: e.to.clone(),
            to_port: e.to_port.clone(),
            rrc: rrc.id.clone(),
        });
        out.get_mut(e.to.as_str()).expect("assigned").inputs.push(InputBinding {
            port: e.to_port.clone(),
            from_offering: e.from.clone(),
            from_port: e.from_port.clone(),
            rrc: rrc.id.clone(),
        });
    }
    for l in rrc_links(rrc, &edges) {
        out.get_mut(l.monitor.as_str())
            .expect("assigned")
            .monitoring
            .push(MonitoringEntry { monitored: l.monitored.clone(), config: l.config });
        out.get_mut(l.monitored.as_str()).expect("assigned").heartbeat_targets.push(l.monitor);
    }
    Ok(out.into_values().collect())
}

/// The complete monitoring topology, sorted by `(monitor, monitored)`.
///
/// Active RRCs contribute their dataflow links and backlinks. Registered
/// offerings left without any such link are ordered by id and each monitors
/// its successor, closing a ring; one idle offering alone stays unlinked.
/// Duplicate `(monitor, monitored)` pairs keep the first RRC's config.
pub fn derive_monitoring_links<'a>(
    rrcs: impl IntoIterator<Item = &'a RecipeRuntimeConfiguration>,
    recipes: &BTreeMap<String, Recipe>,
    registry: &Registry,
    ring_config: DetectorConfig,
) -> Result<Vec<MonitoringLink>, ChoreoError> {
    let mut links: BTreeMap<(String, String), MonitoringLink> = BTreeMap::new();
    for rrc in rrcs.into_iter().filter(|r| r.status == RrcStatus::Active) {
        let recipe = recipes.get(&rrc.recipe).ok_or_else(|| ChoreoError::UnknownRecipe(rrc.recipe.clone()))?;
        let edges = expand_edges(rrc, recipe, registry)?;
        for l in rrc_links(rrc, &edges) {
            links.entry((l.monitor.clone(), l.monitored.clone())).or_insert(l);
        }
    }
    let linked: BTreeSet<&str> = links.keys().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let idle: Vec<&str> = registry.ids().filter(|id| !linked.contains(id)).collect();
    let mut ring = Vec::new();
    if idle.len() >= 2 {
        for (i, id) in idle.iter().enumerate() {
            let next = idle[(i + 1) % idle.len()];
            ring.push(MonitoringLink {
                monitor: id.to_string(),
                monitored: next.to_string(),
                config: ring_config,
                origin: LinkOrigin::Ring,
            });
        }
    }
    for l in ring {
        links.entry((l.monitor.clone(), l.monitored.clone())).or_insert(l);
    }
    Ok(links.into_values().collect())
}

/// Merged descriptors for every registered offering: routing from all active
/// RRCs plus the global monitoring topology. Idle offerings get a
/// monitoring-only descriptor.
pub fn build_descriptors<'a>(
    rrcs: impl IntoIterator<Item = &'a RecipeRuntimeConfiguration> + Clone,
    recipes: &BTreeMap<String, Recipe>,
    registry: &Registry,
    ring_config: DetectorConfig,
) -> Result<BTreeMap<String, InteractionDescriptor>, ChoreoError> {
    let mut out: BTreeMap<String, InteractionDescriptor> =
        registry.ids().map(|id| (id.to_string(), InteractionDescriptor::empty(id))).collect();
    for rrc in rrcs.clone().into_iter().filter(|r| r.status == RrcStatus::Active) {
        let recipe = recipes.get(&rrc.recipe).ok_or_else(|| ChoreoError::UnknownRecipe(rrc.recipe.clone()))?;
        for d in generate_interaction_descriptors(rrc, recipe, registry)? {
            let entry = out.get_mut(&d.offering_id).expect("registered");
            entry.inputs.extend(d.inputs);
            entry.outputs.extend(d.outputs);
        }
    }
    for l in derive_monitoring_links(rrcs, recipes, registry, ring_config)? {
        out.get_mut(&l.monitor)
            .expect("registered")
            .monitoring
            .push(MonitoringEntry { monitored: l.monitored.clone(), config: l.config });
        out.get_mut(&l.monitored).expect("registered").heartbeat_targets.push(l.monitor);
    }
    for d in out.values_mut() {
        d.inputs.sort();
        d.inputs.dedup();
        d.outputs.sort();
        d.outputs.dedup();
    }
    Ok(out)
}
