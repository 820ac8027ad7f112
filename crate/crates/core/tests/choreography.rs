use std::collections::{BTreeMap, BTreeSet};

use choreo_core::choreography::{
    assignment_violations, build_descriptors, derive_monitoring_links, instantiate_rrc, match_offering, Cardinality,
    CategoryTaxonomy, ChoreoError, Endpoint, Expr, Ingredient, Interaction, Offering, OfferingSelectionRule, Port,
    Recipe, RecipeRuntimeConfiguration, Registry, RrcStatus,
};
use choreo_core::detectors::DetectorConfig;
use proptest::prelude::*;

const ROOMS: [&str; 3] = ["A", "B", "C"];

fn taxonomy() -> CategoryTaxonomy {
    serde_json::from_str(
        r#"{"categories": [
            {"id": "Device", "parents": []},
            {"id": "Switch", "parents": ["Device"]},
            {"id": "Light", "parents": ["Device"]},
            {"id": "DimmableLight", "parents": ["Light"]}
        ]}"#,
    )
    .unwrap()
}

fn recipe() -> Recipe {
    let ingredient = |id: &str, cat: &str, inputs: Vec<Port>, outputs: Vec<Port>| Ingredient {
        id: id.into(),
        category: cat.into(),
        inputs,
        outputs,
        non_functional_keys: vec!["room".into()],
    };
    Recipe {
        id: "switch-light".into(),
        ingredients: vec![
            ingredient("switch", "Switch", vec![], vec![Port::new("state", "bool")]),
            ingredient("light", "Light", vec![Port::new("power", "bool")], vec![]),
        ],
        interactions: vec![Interaction {
            from: Endpoint { ingredient: "switch".into(), port: "state".into() },
            to: Endpoint { ingredient: "light".into(), port: "power".into() },
        }],
    }
}

fn rrc_for(room: &str) -> RecipeRuntimeConfiguration {
    let mut rrc = RecipeRuntimeConfiguration::new(format!("room-{room}"), "switch-light");
    let expr = Expr::eq("room", room);
    rrc.osrs.insert(
        "switch".into(),
        OfferingSelectionRule { expression: expr.clone(), cardinality: Cardinality { min: 1, max: Some(1) } },
    );
    rrc.osrs.insert("light".into(), OfferingSelectionRule { expression: expr, cardinality: Cardinality::default() });
    rrc
}

fn offering(id: &str, cat: &str, room: &str) -> Offering {
    let port = vec![Port::new(if cat == "Switch" { "pressed" } else { "on" }, "bool")];
    let (inputs, outputs) = if cat == "Switch" { (vec![], port) } else { (port, vec![]) };
    Offering {
        id: id.into(),
        category: cat.into(),
        inputs,
        outputs,
        properties: [("room".to_string(), room.into())].into(),
    }
}

fn world(devices: &[(u8, u8)]) -> Registry {
    let t = taxonomy();
    let mut reg = Registry::new();
    for (i, &(cat, room)) in devices.iter().enumerate() {
        let cat = ["Switch", "Light", "DimmableLight"][cat as usize];
        reg.register(offering(&format!("d{i:02}"), cat, ROOMS[room as usize]), &t).unwrap();
    }
    reg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn selection_and_monitoring_invariants(devices in prop::collection::vec((0u8..3, 0u8..3), 0..14)) {
        let t = taxonomy();
        let recipe = recipe();
        let reg = world(&devices);
        let rrcs: Vec<RecipeRuntimeConfiguration> =
            ["A", "B"].iter().map(|r| instantiate_rrc(&rrc_for(r), &recipe, &reg, &t).unwrap()).collect();

        for (rrc, room) in rrcs.iter().zip(["A", "B"]) {
            let in_room = |lights: bool| reg.iter().filter(|o| {
                o.properties["room"] == room.into() && (o.category != "Switch") == lights
            }).count();
            let expect_active = in_room(false) >= 1 && in_room(true) >= 1;
            prop_assert_eq!(rrc.status == RrcStatus::Active, expect_active);
            if expect_active {
                prop_assert!(assignment_violations(rrc, &recipe, &reg, &t).is_empty());
                prop_assert_eq!(rrc.assignment["switch"].len(), 1);
                prop_assert_eq!(rrc.assignment["light"].len(), in_room(true));
            }
        }

        let recipes = BTreeMap::from([(recipe.id.clone(), recipe.clone())]);
        let links = derive_monitoring_links(&rrcs, &recipes, &reg, DetectorConfig::default()).unwrap();
        let pairs: BTreeSet<(String, String)> = links.iter().map(|l| (l.monitor.clone(), l.monitored.clone())).collect();
        prop_assert_eq!(pairs.len(), links.len(), "duplicate links");
        prop_assert!(links.iter().all(|l| l.monitor != l.monitored && reg.contains(&l.monitor) && reg.contains(&l.monitored)));

        // offerings of unsatisfied configurations count as idle
        let used: BTreeSet<&str> =
            rrcs.iter().filter(|r| r.status == RrcStatus::Active).flat_map(|r| r.offerings()).collect();
        let idle = reg.len() - used.len();
        for id in reg.ids() {
            let watched = links.iter().any(|l| l.monitored == id);
            let expected = used.contains(id) || idle >= 2;
            prop_assert_eq!(watched, expected, "offering {}", id);
        }

        // routing is symmetric and heartbeats go to exactly the monitors
        let descriptors = build_descriptors(&rrcs, &recipes, &reg, DetectorConfig::default()).unwrap();
        prop_assert_eq!(descriptors.len(), reg.len());
        for (id, d) in &descriptors {
            for out in &d.outputs {
                let peer = &descriptors[&out.to_offering];
                prop_assert!(peer.inputs.iter().any(|b| &b.from_offering == id && b.port == out.to_port && b.from_port == out.port));
            }
            let monitors: BTreeSet<&str> = links.iter().filter(|l| &l.monitored == id).map(|l| l.monitor.as_str()).collect();
            let targets: BTreeSet<&str> = d.heartbeat_targets.iter().map(String::as_str).collect();
            prop_assert_eq!(targets, monitors);
        }
    }
}

#[test]
fn subcategories_fill_ingredients() {
    let t = taxonomy();
    assert!(t.is_a("DimmableLight", "Device").unwrap());
    assert!(!t.is_a("Light", "DimmableLight").unwrap());
    assert!(t.is_a("Lamp", "Device").is_err());
    let recipe = recipe();
    let dimmer = offering("dim", "DimmableLight", "A");
    assert!(match_offering(&recipe.ingredients[1], &dimmer, &t).unwrap());
    assert!(!match_offering(&recipe.ingredients[0], &dimmer, &t).unwrap());
}

#[test]
fn rules_parse_from_json_and_filter() {
    let rule: OfferingSelectionRule = serde_json::from_str(
        r#"{"expression": {"op": "and", "args": [
                {"op": "eq", "key": "room", "value": "A"},
                {"op": "ge", "key": "brightness", "value": 50}
            ]},
            "cardinality": {"min": 1, "max": 2}}"#,
    )
    .unwrap();
    let mut o = offering("l", "Light", "A");
    o.properties.insert("brightness".into(), 80.0.into());
    assert!(rule.expression.evaluate(&o));
    o.properties.insert("brightness".into(), 20.0.into());
    assert!(!rule.expression.evaluate(&o));
    o.properties.remove("brightness");
    assert!(!rule.expression.evaluate(&o));
}

#[test]
fn broken_documents_are_rejected() {
    let cyclic = r#"{"categories": [{"id": "A", "parents": ["B"]}, {"id": "B", "parents": ["A"]}]}"#;
    assert!(serde_json::from_str::<CategoryTaxonomy>(cyclic).is_err());
    let t = taxonomy();
    let mut r = recipe();
    r.interactions[0].to.port = "missing".into();
    assert!(matches!(r.validate(&t), Err(ChoreoError::InvalidRecipe { .. })));
    let mut reg = Registry::new();
    assert!(matches!(reg.register(offering("x", "Toaster", "A"), &t), Err(ChoreoError::InvalidOffering { .. })));
}
