//! ABAC formalism: attribute schemas, filters, requests, rules, policies and
//! access logs, plus ground-truth policy evaluation.

mod file;
mod log;
mod policy;
mod request;
mod schema;

pub use file::{load_policy, policy_from_json, policy_to_json, save_policy};
pub use log::{AccessLog, AuthorizationTuple, LogEntry};
pub use policy::{
    policy_decide, rule_matches, validate_policy, AbacPolicy, AbacRule, CompiledPolicy,
    ConflictMode, OpPattern, Violation,
};
pub use request::{AccessRequest, Decision};
pub use schema::{
    filter_matches, AttributeAssignment, AttributeDef, AttributeFilter, AttributeKind,
    AttributeSchema, DECISION_COLUMN, OPERATION_COLUMN,
};
