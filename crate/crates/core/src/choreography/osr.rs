use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::model::{Offering, PropertyValue};

/// Boolean expression over an offering's non-functional properties.
///
/// A comparison whose key is missing, or whose operand types differ, is
/// false: an offering that does not declare a property cannot satisfy a
/// restriction on it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    #[default]
    True,
    Eq {
        key: String,
        value: PropertyValue,
    },
    Ne {
        key: String,
        value: PropertyValue,
    },
    Lt {
        key: String,
        value: f64,
    },
    Le {
        key: String,
        value: f64,
    },
    Gt {
        key: String,
        value: f64,
    },
    Ge {
        key: String,
        value: f64,
    },
    And {
        args: Vec<Expr>,
    },
    Or {
        args: Vec<Expr>,
    },
    Not {
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn eq(key: impl Into<String>, value: impl Into<PropertyValue>) -> Self {
        Expr::Eq { key: key.into(), value: value.into() }
    }

    pub fn negate(arg: Expr) -> Self {
        Expr::Not { arg: Box::new(arg) }
    }

    pub fn evaluate(&self, offering: &Offering) -> bool {
        let numeric = |key: &str, value: f64, accept: fn(Ordering) -> bool| match offering.properties.get(key) {
            Some(PropertyValue::Number(n)) => n.partial_cmp(&value).is_some_and(accept),
            _ => false,
        };
        match self {
            Expr::True => true,
            Expr::Eq { key, value } => offering.properties.get(key).is_some_and(|v| v == value),
            Expr::Ne { key, value } => offering.properties.get(key).is_some_and(|v| v != value),
            Expr::Lt { key, value } => numeric(key, *value, Ordering::is_lt),
            Expr::Le { key, value } => numeric(key, *value, Ordering::is_le),
            Expr::Gt { key, value } => numeric(key, *value, Ordering::is_gt),
            Expr::Ge { key, value } => numeric(key, *value, Ordering::is_ge),
            Expr::And { args } => args.iter().all(|a| a.evaluate(offering)),
            Expr::Or { args } => args.iter().any(|a| a.evaluate(offering)),
            Expr::Not { arg } => !arg.evaluate(offering),
        }
    }

    /// Property keys referenced anywhere in the expression.
    pub fn keys(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_keys(&mut out);
        out
    }

    fn collect_keys<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::True => {}
            Expr::Eq { key, .. }
            | Expr::Ne { key, .. }
            | Expr::Lt { key, .. }
            | Expr::Le { key, .. }
            | Expr::Gt { key, .. }
            | Expr::Ge { key, .. } => {
                out.insert(key);
            }
            Expr::And { args } | Expr::Or { args } => args.iter().for_each(|a| a.collect_keys(out)),
            Expr::Not { arg } => arg.collect_keys(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cardinality {
    #[serde(default = "one")]
    pub min: usize,
    /// `None` means unbounded.
    #[serde(default)]
    pub max: Option<usize>,
}

fn one() -> usize {
    1
}

impl Default for Cardinality {
    fn default() -> Self {
        Self { min: 1, max: None }
    }
}

impl Cardinality {
    pub fn admits(&self, count: usize) -> bool {
        count >= self.min && self.max.is_none_or(|m| count <= m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferingSelectionRule {
    #[serde(default)]
    pub expression: Expr,
    #[serde(default)]
    pub cardinality: Cardinality,
}

impl OfferingSelectionRule {
    pub fn validate(&self, declared_keys: &[String]) -> Result<(), String> {
        if let Some(max) = self.cardinality.max {
            if self.cardinality.min > max {
                return Err(format!("cardinality min {} exceeds max {max}", self.cardinality.min));
            }
        }
        if let Some(k) = self.expression.keys().into_iter().find(|k| !declared_keys.iter().any(|d| d == k)) {
            return Err(format!("expression uses undeclared property `{k}`"));
        }
        Ok(())
    }
}

pub fn evaluate_osr(osr: &OfferingSelectionRule, offering: &Offering) -> bool {
    osr.expression.evaluate(offering)
}
