//! Recipes, offerings and their runtime configurations.
//!
//! A recipe is a dataflow template of ingredients (semantic category plus
//! typed ports). Offerings are concrete devices or services registered with
//! the controller; selection rules pick which offerings fill which
//! ingredient. From an instantiated configuration the module derives the
//! per-engine interaction descriptors and the monitoring topology.

mod indes;
mod model;
mod osr;
mod rrc;
mod taxonomy;

use thiserror::Error;

pub use indes::{
    build_descriptors, derive_monitoring_links, generate_interaction_descriptors, InputBinding, InteractionDescriptor,
    LinkOrigin, MonitoringEntry, MonitoringLink, OutputTarget,
};
pub use model::{
    match_offering, port_mapping, Endpoint, Ingredient, Interaction, Offering, Port, PortMapping, PropertyValue,
    Recipe, Registry,
};
pub use osr::{evaluate_osr, Cardinality, Expr, OfferingSelectionRule};
pub use rrc::{assignment_violations, instantiate_rrc, RecipeRuntimeConfiguration, RrcStatus};
pub use taxonomy::{CategoryNode, CategoryTaxonomy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChoreoError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("invalid recipe `{recipe}`: {msg}")]
    InvalidRecipe { recipe: String, msg: String },
    #[error("invalid offering `{id}`: {msg}")]
    InvalidOffering { id: String, msg: String },
    #[error("invalid configuration `{rrc}`: {msg}")]
    InvalidRule { rrc: String, msg: String },
    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),
    #[error("unknown offering `{0}`")]
    UnknownOffering(String),
    #[error("configuration `{0}` is not active")]
    Inactive(String),
}
