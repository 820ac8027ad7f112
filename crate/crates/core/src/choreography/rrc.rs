use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;

use super::model::{match_offering, Recipe, Registry};
use super::osr::{evaluate_osr, OfferingSelectionRule};
use super::taxonomy::CategoryTaxonomy;
use super::ChoreoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrcStatus {
    #[default]
    Unsatisfied,
    Active,
    /// Was active, lost an offering and found no replacement.
    Degraded,
}

/// One instantiation of a recipe: selection rules, the failure-detection
/// parameters of its links, and the offerings currently filling each
/// ingredient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeRuntimeConfiguration {
    pub id: String,
    pub recipe: String,
    /// Rules keyed by ingredient id; ingredients without a rule accept any
    /// matching offering with cardinality `1..`.
    #[serde(default)]
    pub osrs: BTreeMap<String, OfferingSelectionRule>,
    #[serde(default)]
    pub failure_detection: DetectorConfig,
    #[serde(default)]
    pub assignment: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub status: RrcStatus,
}

impl RecipeRuntimeConfiguration {
    pub fn new(id: impl Into<String>, recipe: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            recipe: recipe.into(),
            osrs: BTreeMap::new(),
            failure_detection: DetectorConfig::default(),
            assignment: BTreeMap::new(),
            status: RrcStatus::Unsatisfied,
        }
    }

    pub fn osr(&self, ingredient: &str) -> OfferingSelectionRule {
        self.osrs.get(ingredient).cloned().unwrap_or_default()
    }

    /// Offerings assigned to any ingredient.
    pub fn offerings(&self) -> BTreeSet<&str> {
        self.assignment.values().flatten().map(String::as_str).collect()
    }

    pub fn uses(&self, offering: &str) -> bool {
        self.assignment.values().any(|s| s.contains(offering))
    }

    pub fn validate(&self, recipe: &Recipe) -> Result<(), ChoreoError> {
        let bad = |msg: String| ChoreoError::InvalidRule { rrc: self.id.clone(), msg };
        if recipe.id != self.recipe {
            return Err(bad(format!("built for recipe `{}`, got `{}`", self.recipe, recipe.id)));
        }
        for (ing_id, osr) in &self.osrs {
            let ing =
                recipe.ingredient(ing_id).ok_or_else(|| bad(format!("rule for unknown ingredient `{ing_id}`")))?;
            osr.validate(&ing.non_functional_keys).map_err(|m| bad(format!("ingredient `{ing_id}`: {m}")))?;
        }
        self.failure_detection.validate().map_err(|e| bad(format!("failure_detection: {e}")))?;
        Ok(())
    }
}

/// Re-runs offering selection from scratch: per ingredient, every registered
/// offering passing both the semantic match and the rule is a candidate, and
/// the lowest ids are taken up to the maximum cardinality.
pub fn instantiate_rrc(
    rrc: &RecipeRuntimeConfiguration,
    recipe: &Recipe,
    registry: &Registry,
    taxonomy: &CategoryTaxonomy,
) -> Result<RecipeRuntimeConfiguration, ChoreoError> {
    rrc.validate(recipe)?;
    let mut assignment = BTreeMap::new();
    let mut satisfied = true;
    for ing in &recipe.ingredients {
        let osr = rrc.osr(&ing.id);
        let mut chosen = BTreeSet::new();
        // registry iterates in ascending id order
        for offering in registry.iter() {
            if osr.cardinality.max.is_some_and(|m| chosen.len() >= m) {
                break;
            }
            if match_offering(ing, offering, taxonomy)? && evaluate_osr(&osr, offering) {
                chosen.insert(offering.id.clone());
            }
        }
        satisfied &= chosen.len() >= osr.cardinality.min;
        assignment.insert(ing.id.clone(), chosen);
    }
    Ok(RecipeRuntimeConfiguration {
        assignment,
        status: if satisfied { RrcStatus::Active } else { RrcStatus::Unsatisfied },
        ..rrc.clone()
    })
}

/// Every violated constraint of the current assignment, empty when valid.
pub fn assignment_violations(
    rrc: &RecipeRuntimeConfiguration,
    recipe: &Recipe,
    registry: &Registry,
    taxonomy: &CategoryTaxonomy,
) -> Vec<String> {
    let mut out = Vec::new();
    for ing in &recipe.ingredients {
        let osr = rrc.osr(&ing.id);
        let empty = BTreeSet::new();
        let assigned = rrc.assignment.get(&ing.id).unwrap_or(&empty);
        if !osr.cardinality.admits(assigned.len()) {
            out.push(format!("{}/{}: {} offerings violate {:?}", rrc.id, ing.id, assigned.len(), osr.cardinality));
        }
        for id in assigned {
            match registry.get(id) {
                None => out.push(format!("{}/{}: `{id}` is not registered", rrc.id, ing.id)),
                Some(o) => {
                    if !match_offering(ing, o, taxonomy).unwrap_or(false) {
                        out.push(format!("{}/{}: `{id}` does not match the ingredient", rrc.id, ing.id));
                    }
                    if !evaluate_osr(&osr, o) {
                        out.push(format!("{}/{}: `{id}` fails the selection rule", rrc.id, ing.id));
                    }
                }
            }
        }
    }
    for extra in rrc.assignment.keys().filter(|k| recipe.ingredient(k).is_none()) {
        out.push(format!("{}: assignment for unknown ingredient `{extra}`", rrc.id));
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::choreography::model::{Ingredient, Offering, Port};
    use crate::choreography::osr::{Cardinality, Expr};
    use crate::choreography::taxonomy::CategoryNode;

    fn taxonomy() -> CategoryTaxonomy {
        CategoryTaxonomy::new([
            CategoryNode { id: "Switch".into(), parents: vec![] },
            CategoryNode { id: "Light".into(), parents: vec![] },
        ])
        .unwrap()
    }

    fn recipe() -> Recipe {
        Recipe {
            id: "lights".into(),
            ingredients: vec![Ingredient {
                id: "switch".into(),
                category: "Switch".into(),
                inputs: vec![],
                outputs: vec![Port::new("state", "bool")],
                non_functional_keys: vec!["location".into()],
            }],
            interactions: vec![],
        }
    }

    fn switch(id: &str, room: &str) -> Offering {
        Offering {
            id: id.into(),
            category: "Switch".into(),
            inputs: vec![],
            outputs: vec![Port::new("out", "bool")],
            properties: [("location".to_string(), room.into())].into(),
        }
    }

    fn registry(offerings: &[Offering]) -> Registry {
        let t = taxonomy();
        let mut r = Registry::new();
        for o in offerings {
            r.register(o.clone(), &t).unwrap();
        }
        r
    }

    fn rrc(card: Cardinality) -> RecipeRuntimeConfiguration {
        let mut rrc = RecipeRuntimeConfiguration::new("rrc", "lights");
        rrc.osrs.insert(
            "switch".into(),
            OfferingSelectionRule { expression: Expr::eq("location", "Room A"), cardinality: card },
        );
        rrc
    }

    #[test]
    fn max_one_picks_lowest_id() {
        let reg = registry(&[switch("s2", "Room A"), switch("s1", "Room A"), switch("s0", "Room B")]);
        let out = instantiate_rrc(&rrc(Cardinality { min: 1, max: Some(1) }), &recipe(), &reg, &taxonomy()).unwrap();
        assert_eq!(out.status, RrcStatus::Active);
        assert_eq!(out.assignment["switch"], BTreeSet::from(["s1".to_string()]));
        assert!(assignment_violations(&out, &recipe(), &reg, &taxonomy()).is_empty());
    }

    #[test]
    fn no_candidates_is_unsatisfied() {
        let reg = registry(&[switch("s0", "Room B")]);
        let out = instantiate_rrc(&rrc(Cardinality::default()), &recipe(), &reg, &taxonomy()).unwrap();
        assert_eq!(out.status, RrcStatus::Unsatisfied);
        assert!(out.assignment["switch"].is_empty());
    }

    #[test]
    fn bounded_selection_takes_lowest_ids() {
        let reg = registry(&[switch("c", "Room A"), switch("a", "Room A"), switch("b", "Room A")]);
        let out = instantiate_rrc(&rrc(Cardinality { min: 1, max: Some(2) }), &recipe(), &reg, &taxonomy()).unwrap();
        // of the three 2-subsets, the tie-break keeps the two smallest ids
        assert_eq!(out.assignment["switch"], BTreeSet::from(["a".to_string(), "b".to_string()]));
    }

    #[test]
    fn rule_on_undeclared_key_is_rejected() {
        let mut bad = rrc(Cardinality::default());
        bad.osrs.get_mut("switch").unwrap().expression = Expr::eq("colour", "red");
        assert!(matches!(
            instantiate_rrc(&bad, &recipe(), &Registry::new(), &taxonomy()),
            Err(ChoreoError::InvalidRule { .. })
        ));
    }

    proptest! {
        #[test]
        fn selection_respects_rules_and_bounds(
            rooms in prop::collection::vec(prop::bool::ANY, 0..8),
            min in 0usize..3,
            extra in prop::option::of(0usize..3),
        ) {
            let offerings: Vec<Offering> = rooms
                .iter()
                .enumerate()
                .map(|(i, a)| switch(&format!("s{i}"), if *a { "Room A" } else { "Room B" }))
                .collect();
            let reg = registry(&offerings);
            let card = Cardinality { min, max: extra.map(|e| min + e) };
            let out = instantiate_rrc(&rrc(card), &recipe(), &reg, &taxonomy()).unwrap();
            let chosen = &out.assignment["switch"];
            let candidates = rooms.iter().filter(|a| **a).count();
            prop_assert!(card.max.is_none_or(|m| chosen.len() <= m));
            prop_assert_eq!(chosen.len(), card.max.map_or(candidates, |m| m.min(candidates)));
            for id in chosen {
                prop_assert_eq!(&reg.get(id).unwrap().properties["location"], &"Room A".into());
            }
            prop_assert_eq!(out.status == RrcStatus::Active, candidates >= min);
            if out.status == RrcStatus::Active {
                prop_assert!(assignment_violations(&out, &recipe(), &reg, &taxonomy()).is_empty());
            }
            let again = instantiate_rrc(&rrc(card), &recipe(), &reg, &taxonomy()).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
