use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::choreography::{
    assignment_violations, build_descriptors, instantiate_rrc, CategoryTaxonomy, InteractionDescriptor, Offering,
    Recipe, RecipeRuntimeConfiguration, Registry, RrcStatus,
};
use crate::detectors::DetectorConfig;

use super::RuntimeError;

/// Central registry and configuration authority. Engines only talk to it to
/// register and to report failures; everything else runs peer to peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub taxonomy: CategoryTaxonomy,
    pub recipes: BTreeMap<String, Recipe>,
    /// Every offering ever registered, including failed ones.
    pub registry: Registry,
    /// Offerings reported as crashed; excluded until they re-register.
    pub failed: BTreeSet<String>,
    pub rrcs: BTreeMap<String, RecipeRuntimeConfiguration>,
    /// Configuration for links among idle offerings.
    pub default_detector: DetectorConfig,
    /// Last descriptor sent to each engine.
    pub distributed: BTreeMap<String, InteractionDescriptor>,
}

/// Descriptors to send, one per engine whose configuration changed.
pub type Distribution = Vec<InteractionDescriptor>;

#[derive(Debug, Clone, PartialEq)]
pub enum FailureOutcome {
    Recovered(Distribution),
    /// Unknown or already failed offering; nothing changed.
    Ignored(String),
}

impl ControllerState {
    pub fn new(
        taxonomy: CategoryTaxonomy,
        recipes: impl IntoIterator<Item = Recipe>,
        rrcs: impl IntoIterator<Item = RecipeRuntimeConfiguration>,
        default_detector: DetectorConfig,
    ) -> Result<Self, RuntimeError> {
        let mut by_id = BTreeMap::new();
        for r in recipes {
            r.validate(&taxonomy)?;
            if by_id.contains_key(&r.id) {
                return Err(RuntimeError::InvalidScenario {
                    field: "recipes".into(),
                    msg: format!("duplicate recipe `{}`", r.id),
                });
            }
            by_id.insert(r.id.clone(), r);
        }
        let mut rrc_map = BTreeMap::new();
        for mut rrc in rrcs {
            let recipe = by_id
                .get(&rrc.recipe)
                .ok_or_else(|| crate::choreography::ChoreoError::UnknownRecipe(rrc.recipe.clone()))?;
            rrc.validate(recipe)?;
            rrc.assignment.clear();
            rrc.status = RrcStatus::Unsatisfied;
            if rrc_map.insert(rrc.id.clone(), rrc).is_some() {
                return Err(RuntimeError::InvalidScenario { field: "rrcs".into(), msg: "duplicate rrc id".into() });
            }
        }
        default_detector.validate()?;
        let mut state = Self {
            taxonomy,
            recipes: by_id,
            registry: Registry::new(),
            failed: BTreeSet::new(),
            rrcs: rrc_map,
            default_detector,
            distributed: BTreeMap::new(),
        };
        state.reconcile()?;
        Ok(state)
    }

    /// Registered offerings that are not marked failed.
    pub fn live_registry(&self) -> Registry {
        let mut live = self.registry.clone();
        for id in &self.failed {
            live.remove(id);
        }
        live
    }

    /// Inserts or replaces `offering` (clearing any failed mark), re-runs
    /// discovery for every RRC and returns the descriptors that changed.
    pub fn register_offering(&mut self, offering: Offering) -> Result<Distribution, RuntimeError> {
        self.registry.register(offering.clone(), &self.taxonomy)?;
        self.failed.remove(&offering.id);
        self.reconcile()
    }

    /// Marks `failed_id` crashed and re-selects every RRC around it.
    pub fn handle_failure_notification(&mut self, failed_id: &str) -> Result<FailureOutcome, RuntimeError> {
        if !self.registry.contains(failed_id) {
            let msg = format!("failure notification for unknown offering `{failed_id}`");
            warn!("{msg}");
            return Ok(FailureOutcome::Ignored(msg));
        }
        if !self.failed.insert(failed_id.to_string()) {
            let msg = format!("`{failed_id}` already marked failed");
            return Ok(FailureOutcome::Ignored(msg));
        }
        self.distributed.remove(failed_id);
        Ok(FailureOutcome::Recovered(self.reconcile()?))
    }

    /// Re-instantiates every RRC over the live registry and diff-distributes
    /// the resulting descriptors.
    fn reconcile(&mut self) -> Result<Distribution, RuntimeError> {
        let live = self.live_registry();
        for rrc in self.rrcs.values_mut() {
            let recipe = &self.recipes[&rrc.recipe];
            let mut next = instantiate_rrc(rrc, recipe, &live, &self.taxonomy)?;
            if next.status == RrcStatus::Unsatisfied && rrc.status != RrcStatus::Unsatisfied {
                next.status = RrcStatus::Degraded;
            }
            *rrc = next;
        }
        let descriptors = build_descriptors(self.rrcs.values(), &self.recipes, &live, self.default_detector)?;
        let mut changed = Vec::new();
        for (id, d) in descriptors {
            if self.distributed.get(&id) != Some(&d) {
                self.distributed.insert(id, d.clone());
                changed.push(d);
            }
        }
        Ok(changed)
    }

    /// Constraint violations of active RRCs against the live registry.
    pub fn violations(&self) -> Vec<String> {
        let live = self.live_registry();
        self.rrcs
            .values()
            .filter(|r| r.status == RrcStatus::Active)
            .flat_map(|r| assignment_violations(r, &self.recipes[&r.recipe], &live, &self.taxonomy))
            .collect()
    }
}
