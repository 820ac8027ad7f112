use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ChoreoError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryNode {
    pub id: String,
    /// Direct supercategories (`id` is-a each parent).
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyDoc {
    categories: Vec<CategoryNode>,
}

/// Category hierarchy used for semantic matching. Loaded from
/// `{"categories": [{"id": "...", "parents": [...]}]}` and validated to be
/// acyclic with every parent declared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyDoc", into = "TaxonomyDoc")]
pub struct CategoryTaxonomy {
    parents: BTreeMap<String, Vec<String>>,
}

impl TryFrom<TaxonomyDoc> for CategoryTaxonomy {
    type Error = ChoreoError;

    fn try_from(doc: TaxonomyDoc) -> Result<Self, Self::Error> {
        CategoryTaxonomy::new(doc.categories)
    }
}

impl From<CategoryTaxonomy> for TaxonomyDoc {
    fn from(t: CategoryTaxonomy) -> Self {
        TaxonomyDoc { categories: t.parents.into_iter().map(|(id, parents)| CategoryNode { id, parents }).collect() }
    }
}

impl CategoryTaxonomy {
    pub fn new(nodes: impl IntoIterator<Item = CategoryNode>) -> Result<Self, ChoreoError> {
        let mut parents = BTreeMap::new();
        for node in nodes {
            if parents.insert(node.id.clone(), node.parents).is_some() {
                return Err(ChoreoError::InvalidTaxonomy(format!("category `{}` declared twice", node.id)));
            }
        }
        for (id, ps) in &parents {
            if let Some(missing) = ps.iter().find(|p| !parents.contains_key(*p)) {
                return Err(ChoreoError::InvalidTaxonomy(format!("`{id}` names unknown parent `{missing}`")));
            }
        }
        let taxonomy = Self { parents };
        taxonomy.check_acyclic()?;
        Ok(taxonomy)
    }

    fn check_acyclic(&self) -> Result<(), ChoreoError> {
        // Kahn's algorithm over child -> parent edges
        let mut indegree: BTreeMap<&str, usize> = self.parents.keys().map(|k| (k.as_str(), 0)).collect();
        for ps in self.parents.values() {
            for p in ps {
                *indegree.get_mut(p.as_str()).expect("checked") += 1;
            }
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0;
        while let Some(node) = ready.pop() {
            seen += 1;
            for p in &self.parents[node] {
                let d = indegree.get_mut(p.as_str()).expect("checked");
                *d -= 1;
                if *d == 0 {
                    ready.push(p);
                }
            }
        }
        if seen != self.parents.len() {
            return Err(ChoreoError::InvalidTaxonomy("subsumption edges form a cycle".into()));
        }
        Ok(())
    }

    pub fn contains(&self, category: &str) -> bool {
        self.parents.contains_key(category)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    /// True iff `category` equals `ancestor` or reaches it via parent edges.
    pub fn is_a(&self, category: &str, ancestor: &str) -> Result<bool, ChoreoError> {
        for c in [category, ancestor] {
            if !self.contains(c) {
                return Err(ChoreoError::UnknownCategory(c.to_string()));
            }
        }
        let mut stack = vec![category];
        let mut visited = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == ancestor {
                return Ok(true);
            }
            if visited.insert(c) {
                stack.extend(self.parents[c].iter().map(String::as_str));
            }
        }
        Ok(false)
    }
}
