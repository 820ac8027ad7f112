use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::taxonomy::CategoryTaxonomy;
use super::ChoreoError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub name: String,
    pub data_type: String,
}

impl Port {
    pub fn new(name: impl Into<String>, data_type: impl Into<String>) -> Self {
        Self { name: name.into(), data_type: data_type.into() }
    }
}

fn check_unique_ports(owner: &str, ports: &[Port], dir: &str) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for p in ports {
        if !seen.insert(p.name.as_str()) {
            return Err(format!("`{owner}` declares {dir} port `{}` twice", p.name));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ingredient {
    pub id: String,
    pub category: String,
    #[serde(default)]
    pub inputs: Vec<Port>,
    #[serde(default)]
    pub outputs: Vec<Port>,
    /// Property keys selection rules on this ingredient may refer to.
    #[serde(default)]
    pub non_functional_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub ingredient: String,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    /// An output port of the sending ingredient.
    pub from: Endpoint,
    /// An input port of the receiving ingredient.
    pub to: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub id: String,
    pub ingredients: Vec<Ingredient>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl Recipe {
    pub fn ingredient(&self, id: &str) -> Option<&Ingredient> {
        self.ingredients.iter().find(|i| i.id == id)
    }

    /// Checks port references, type agreement and acyclicity of the dataflow.
    pub fn validate(&self, taxonomy: &CategoryTaxonomy) -> Result<(), ChoreoError> {
        let bad = |msg: String| ChoreoError::InvalidRecipe { recipe: self.id.clone(), msg };
        let mut ids = BTreeSet::new();
        for ing in &self.ingredients {
            if !ids.insert(ing.id.as_str()) {
                return Err(bad(format!("ingredient `{}` declared twice", ing.id)));
            }
            if !taxonomy.contains(&ing.category) {
                return Err(bad(format!("ingredient `{}` has unknown category `{}`", ing.id, ing.category)));
            }
            check_unique_ports(&ing.id, &ing.inputs, "input").map_err(bad)?;
            check_unique_ports(&ing.id, &ing.outputs, "output").map_err(bad)?;
        }
        for (k, int) in self.interactions.iter().enumerate() {
            let port = |end: &Endpoint, outputs: bool| -> Result<&Port, ChoreoError> {
                let ing = self.ingredient(&end.ingredient).ok_or_else(|| {
                    bad(format!("interaction {k} references unknown ingredient `{}`", end.ingredient))
                })?;
                let ports = if outputs { &ing.outputs } else { &ing.inputs };
                ports.iter().find(|p| p.name == end.port).ok_or_else(|| {
                    let dir = if outputs { "output" } else { "input" };
                    bad(format!("interaction {k}: `{}` has no {dir} port `{}`", end.ingredient, end.port))
                })
            };
            let (src, dst) = (port(&int.from, true)?, port(&int.to, false)?);
            if src.data_type != dst.data_type {
                return Err(bad(format!("interaction {k} connects `{}` to `{}`", src.data_type, dst.data_type)));
            }
        }
        if self.has_cycle() {
            return Err(bad("interactions form a cycle".into()));
        }
        Ok(())
    }

    fn has_cycle(&self) -> bool {
        let mut indegree: BTreeMap<&str, usize> = self.ingredients.iter().map(|i| (i.id.as_str(), 0)).collect();
        for int in &self.interactions {
            *indegree.entry(int.to.ingredient.as_str()).or_default() += 1;
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for int in self.interactions.iter().filter(|i| i.from.ingredient == n) {
                let d = indegree.get_mut(int.to.ingredient.as_str()).expect("counted");
                *d -= 1;
                if *d == 0 {
                    ready.push(&int.to.ingredient);
                }
            }
        }
        seen != indegree.len()
    }
}

/// Value of a non-functional property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Bool(b) => write!(f, "{b}"),
            PropertyValue::Number(n) => write!(f, "{n}"),
            PropertyValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Text(s.to_string())
    }
}

impl From<f64> for PropertyValue {
    fn from(n: f64) -> Self {
        PropertyValue::Number(n)
    }
}

impl From<bool> for PropertyValue {
    fn from(b: bool) -> Self {
        PropertyValue::Bool(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Offering {
    pub id: String,
    pub category: String,
    #[serde(default)]
    pub inputs: Vec<Port>,
    #[serde(default)]
    pub outputs: Vec<Port>,
    #[serde(default)]
    pub properties: BTreeMap<String, PropertyValue>,
}

impl Offering {
    pub fn validate(&self, taxonomy: &CategoryTaxonomy) -> Result<(), ChoreoError> {
        let bad = |msg: String| ChoreoError::InvalidOffering { id: self.id.clone(), msg };
        if self.id.is_empty() {
            return Err(bad("id must not be empty".into()));
        }
        if !taxonomy.contains(&self.category) {
            return Err(bad(format!("unknown category `{}`", self.category)));
        }
        check_unique_ports(&self.id, &self.inputs, "input").map_err(bad)?;
        check_unique_ports(&self.id, &self.outputs, "output").map_err(bad)?;
        Ok(())
    }
}

/// Registered offerings keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    offerings: BTreeMap<String, Offering>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an offering after validating it.
    pub fn register(
        &mut self,
        offering: Offering,
        taxonomy: &CategoryTaxonomy,
    ) -> Result<Option<Offering>, ChoreoError> {
        offering.validate(taxonomy)?;
        Ok(self.offerings.insert(offering.id.clone(), offering))
    }

    pub fn remove(&mut self, id: &str) -> Option<Offering> {
        self.offerings.remove(id)
    }

    pub fn get(&self, id: &str) -> Option<&Offering> {
        self.offerings.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.offerings.contains_key(id)
    }

    /// Offerings in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Offering> {
        self.offerings.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.offerings.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.offerings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offerings.is_empty()
    }
}

/// Maps each required port to a distinct offered port of the same data type,
/// taking the first unused candidate in declaration order.
fn map_ports(required: &[Port], offered: &[Port]) -> Option<BTreeMap<String, String>> {
    let mut used = vec![false; offered.len()];
    let mut mapping = BTreeMap::new();
    for req in required {
        let idx = offered.iter().enumerate().position(|(i, p)| !used[i] && p.data_type == req.data_type)?;
        used[idx] = true;
        mapping.insert(req.name.clone(), offered[idx].name.clone());
    }
    Some(mapping)
}

/// Ingredient port name → offering port name, per direction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PortMapping {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// How `offering` would fill `ingredient`'s ports, if its types cover them.
pub fn port_mapping(ingredient: &Ingredient, offering: &Offering) -> Option<PortMapping> {
    Some(PortMapping {
        inputs: map_ports(&ingredient.inputs, &offering.inputs)?,
        outputs: map_ports(&ingredient.outputs, &offering.outputs)?,
    })
}

/// Category subsumption plus typed-port coverage.
pub fn match_offering(
    ingredient: &Ingredient,
    offering: &Offering,
    taxonomy: &CategoryTaxonomy,
) -> Result<bool, ChoreoError> {
    Ok(taxonomy.is_a(&offering.category, &ingredient.category)? && port_mapping(ingredient, offering).is_some())
}
