//! JSON policy files.
//!
//! ```json
//! { "attributes": [{"name": "Role", "kind": "user", "values": ["mother", "child"]}],
//!   "operations": ["play_music"],
//!   "rules": [{"uaf": {"Role": "mother"}, "oaf": {}, "eaf": {}, "op": "*", "decision": "permit"}],
//!   "default": "deny",
//!   "conflict": "deny_overrides" }
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::policy::{validate_policy, AbacPolicy, AbacRule, ConflictMode};
use super::request::Decision;
use super::schema::{AttributeDef, AttributeSchema};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    attributes: Vec<AttributeDef>,
    operations: Vec<String>,
    #[serde(default)]
    rules: Vec<AbacRule>,
    #[serde(default = "default_decision")]
    default: Decision,
    #[serde(default)]
    conflict: ConflictMode,
}

fn default_decision() -> Decision {
    Decision::Deny
}

pub fn policy_to_json(policy: &AbacPolicy) -> String {
    let file = PolicyFile {
        attributes: policy.schema.attributes().to_vec(),
        operations: policy.schema.operations().to_vec(),
        rules: policy.rules.clone(),
        default: policy.default,
        conflict: policy.conflict,
    };
    serde_json::to_string_pretty(&file).expect("policy serializes")
}

/// Parses a policy file and rejects rules that reference anything outside its schema.
pub fn policy_from_json(text: &str) -> Result<AbacPolicy> {
    let file: PolicyFile = serde_json::from_str(text)?;
    let schema = AttributeSchema::new(file.attributes, file.operations)?;
    let policy = AbacPolicy {
        schema: Arc::new(schema),
        rules: file.rules,
        default: file.default,
        conflict: file.conflict,
    };
    let violations = validate_policy(&policy);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::SchemaMismatch(msgs.join("; ")));
    }
    Ok(policy)
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<AbacPolicy> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    policy_from_json(&text)
}

pub fn save_policy(policy: &AbacPolicy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, policy_to_json(policy) + "\n").map_err(|e| Error::io(path, e))
}
