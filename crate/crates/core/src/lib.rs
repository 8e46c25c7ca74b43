//! Adaptive ABAC policy learning with contextual bandits.
//!
//! An authorization engine decides permit or deny for each access request,
//! learns from owner feedback on its decisions only, and can be warm-started
//! from prior knowledge or accelerated by planning over attribute value
//! hierarchies.

pub mod abac;
pub mod data;
pub mod error;
pub mod featurizer;
pub mod feedback;
pub mod harness;
pub mod learners;
pub mod par;
pub mod planning;
pub mod warmstart;

pub use error::{Error, Result};
