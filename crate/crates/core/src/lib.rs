//! Skeleton event-schema induction, schema validation, soft-logic
//! schema matching and schema-library evaluation.

pub mod error;
pub mod inference;
pub mod ingest;
pub mod intrusion;
pub mod metrics;
pub mod mining;
pub mod ontology;
pub mod schema;
pub mod skeleton;
pub mod synth;

pub use error::{Error, Result};
