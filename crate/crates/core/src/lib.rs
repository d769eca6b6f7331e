//! Constraint-aware conversational retrieval over public-service directory
//! data, starting from food-pantry listings.
//!
//! Pipeline: [`ingest`] pages into [`model::PantryRecord`]s, embed and index
//! them ([`vector`]), extract query constraints ([`query`]), filter and rank
//! ([`retriever`]), answer with grounding checks ([`assistant`]), and measure
//! the whole thing ([`eval`]).

pub mod assistant;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod gazetteer;
pub mod ingest;
pub mod model;
pub mod query;
pub mod retriever;
pub mod vector;

pub use assistant::{decide_action, Assistant, Session, SessionStore};
pub use corpus::PantryCorpus;
pub use gazetteer::Gazetteer;
pub use model::{
    ConstraintSet, Day, GroundedResponse, Hit, HitFlag, IdConstraint, IdRequirement, OpenInterval, PantryRecord,
    ResponseKind, RetrievalResult, WeeklySchedule,
};
pub use query::{extract_constraints, is_underspecified, merge_constraints};
pub use retriever::{apply_hard_filters, exact_recall_lookup, retrieve};
