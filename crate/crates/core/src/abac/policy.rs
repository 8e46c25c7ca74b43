use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::request::{AccessRequest, Decision};
use super::schema::{filter_matches, AttributeFilter, AttributeKind, AttributeSchema};
use crate::error::{Error, Result};
use crate::featurizer::State;

/// Operation slot of a rule: a named operation or the `*` wildcard.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum OpPattern {
    Any,
    Named(String),
}

impl OpPattern {
    pub fn named(op: impl Into<String>) -> Self {
        OpPattern::Named(op.into())
    }

    pub fn matches(&self, op: &str) -> bool {
        match self {
            OpPattern::Any => true,
            OpPattern::Named(name) => name == op,
        }
    }
}

impl From<String> for OpPattern {
    fn from(s: String) -> Self {
        if s == "*" {
            OpPattern::Any
        } else {
            OpPattern::Named(s)
        }
    }
}

impl From<OpPattern> for String {
    fn from(p: OpPattern) -> Self {
        match p {
            OpPattern::Any => "*".to_string(),
            OpPattern::Named(s) => s,
        }
    }
}

impl fmt::Display for OpPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpPattern::Any => f.write_str("*"),
            OpPattern::Named(s) => f.write_str(s),
        }
    }
}

/// `<uaf, oaf, eaf, op, d>`: a conjunction over user, object and environment
/// filters plus an operation, yielding a decision when it matches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbacRule {
    #[serde(default)]
    pub uaf: AttributeFilter,
    #[serde(default)]
    pub oaf: AttributeFilter,
    #[serde(default)]
    pub eaf: AttributeFilter,
    pub op: OpPattern,
    pub decision: Decision,
}

impl AbacRule {
    pub fn new(op: OpPattern, decision: Decision) -> Self {
        AbacRule {
            uaf: AttributeFilter::new(),
            oaf: AttributeFilter::new(),
            eaf: AttributeFilter::new(),
            op,
            decision,
        }
    }

    pub fn user(mut self, attr: &str, value: &str) -> Self {
        self.uaf = self.uaf.with(attr, value);
        self
    }

    pub fn object(mut self, attr: &str, value: &str) -> Self {
        self.oaf = self.oaf.with(attr, value);
        self
    }

    pub fn env(mut self, attr: &str, value: &str) -> Self {
        self.eaf = self.eaf.with(attr, value);
        self
    }

    pub fn filter(&self, kind: AttributeKind) -> &AttributeFilter {
        match kind {
            AttributeKind::User => &self.uaf,
            AttributeKind::Object => &self.oaf,
            AttributeKind::Environment => &self.eaf,
        }
    }

    /// Every constraint of the rule, regardless of kind.
    pub fn constraints(&self) -> impl Iterator<Item = (&str, &str)> {
        self.uaf
            .iter()
            .chain(self.oaf.iter())
            .chain(self.eaf.iter())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictMode {
    #[default]
    DenyOverrides,
    FirstMatch,
}

/// An ABAC policy: schema, ordered rules, fallback decision and conflict mode.
#[derive(Clone, Debug, PartialEq)]
pub struct AbacPolicy {
    pub schema: Arc<AttributeSchema>,
    pub rules: Vec<AbacRule>,
    pub default: Decision,
    pub conflict: ConflictMode,
}

impl AbacPolicy {
    /// Deny-overrides with a deny fallback.
    pub fn new(schema: Arc<AttributeSchema>, rules: Vec<AbacRule>) -> Self {
        AbacPolicy {
            schema,
            rules,
            default: Decision::Deny,
            conflict: ConflictMode::DenyOverrides,
        }
    }

    pub fn with_conflict(mut self, conflict: ConflictMode) -> Self {
        self.conflict = conflict;
        self
    }

    pub fn with_default(mut self, default: Decision) -> Self {
        self.default = default;
        self
    }

    pub fn decide(&self, request: &AccessRequest) -> Result<Decision> {
        policy_decide(self, request)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: usize,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule {} field {}: {}",
            self.rule, self.field, self.message
        )
    }
}

fn rule_violations(
    schema: &AttributeSchema,
    index: usize,
    rule: &AbacRule,
    out: &mut Vec<Violation>,
) {
    for (field, kind) in [
        ("uaf", AttributeKind::User),
        ("oaf", AttributeKind::Object),
        ("eaf", AttributeKind::Environment),
    ] {
        for (attr, value) in rule.filter(kind).iter() {
            match schema.attribute(attr) {
                None => out.push(Violation {
                    rule: index,
                    field,
                    message: format!("unknown attribute '{attr}'"),
                }),
                Some(def) if def.kind != kind => out.push(Violation {
                    rule: index,
                    field,
                    message: format!("attribute '{attr}' is {}, not {kind}", def.kind),
                }),
                Some(def) if !def.values.iter().any(|v| v == value) => out.push(Violation {
                    rule: index,
                    field,
                    message: format!("value '{value}' is not in V({attr})"),
                }),
                Some(_) => {}
            }
        }
    }
    if let OpPattern::Named(op) = &rule.op {
        if schema.operation_index(op).is_none() {
            out.push(Violation {
                rule: index,
                field: "op",
                message: format!("unknown operation '{op}'"),
            });
        }
    }
}

/// Lists every rule field referencing something outside the schema.
pub fn validate_policy(policy: &AbacPolicy) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, rule) in policy.rules.iter().enumerate() {
        rule_violations(&policy.schema, i, rule, &mut out);
    }
    out
}

pub fn rule_matches(
    schema: &AttributeSchema,
    rule: &AbacRule,
    request: &AccessRequest,
) -> Result<bool> {
    let mut violations = Vec::new();
    rule_violations(schema, 0, rule, &mut violations);
    if let Some(v) = violations.first() {
        return Err(Error::SchemaMismatch(v.message.clone()));
    }
    request.validate(schema)?;
    for kind in [
        AttributeKind::User,
        AttributeKind::Object,
        AttributeKind::Environment,
    ] {
        if !filter_matches(schema, rule.filter(kind), request.assignment(kind))? {
            return Ok(false);
        }
    }
    Ok(rule.op.matches(&request.operation))
}

/// Evaluates a request against a policy by scanning its rules symbolically.
pub fn policy_decide(policy: &AbacPolicy, request: &AccessRequest) -> Result<Decision> {
    request.validate(&policy.schema)?;
    let mut permitted = false;
    for rule in &policy.rules {
        if !rule_matches(&policy.schema, rule, request)? {
            continue;
        }
        match (policy.conflict, rule.decision) {
            (ConflictMode::FirstMatch, d) => return Ok(d),
            (ConflictMode::DenyOverrides, Decision::Deny) => return Ok(Decision::Deny),
            (ConflictMode::DenyOverrides, Decision::Permit) => permitted = true,
        }
    }
    Ok(if permitted {
        Decision::Permit
    } else {
        policy.default
    })
}

#[derive(Clone, Debug)]
struct CompiledRule {
    constraints: Vec<(usize, u32)>,
    op: Option<u32>,
    decision: Decision,
}

impl CompiledRule {
    #[inline]
    fn matches(&self, state: &State) -> bool {
        self.op.is_none_or(|op| op == state.op)
            && self
                .constraints
                .iter()
                .all(|&(attr, value)| state.values[attr] == value)
    }
}

/// Index-level form of a validated policy, evaluated directly on [`State`]s.
#[derive(Clone, Debug)]
pub struct CompiledPolicy {
    schema: Arc<AttributeSchema>,
    rules: Vec<CompiledRule>,
    default: Decision,
    conflict: ConflictMode,
}

impl CompiledPolicy {
    pub fn new(policy: &AbacPolicy) -> Result<Self> {
        if let Some(v) = validate_policy(policy).into_iter().next() {
            return Err(Error::SchemaMismatch(v.to_string()));
        }
        let schema = &policy.schema;
        let rules = policy
            .rules
            .iter()
            .map(|rule| CompiledRule {
                constraints: rule
                    .constraints()
                    .map(|(attr, value)| {
                        let i = schema.attribute_index(attr).expect("validated");
                        (i, schema.value_index(i, value).expect("validated"))
                    })
                    .collect(),
                op: match &rule.op {
                    OpPattern::Any => None,
                    OpPattern::Named(op) => schema.operation_index(op),
                },
                decision: rule.decision,
            })
            .collect();
        Ok(CompiledPolicy {
            schema: Arc::clone(&policy.schema),
            rules,
            default: policy.default,
            conflict: policy.conflict,
        })
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn decide_state(&self, state: &State) -> Decision {
        let mut permitted = false;
        for rule in &self.rules {
            if !rule.matches(state) {
                continue;
            }
            match (self.conflict, rule.decision) {
                (ConflictMode::FirstMatch, d) => return d,
                (ConflictMode::DenyOverrides, Decision::Deny) => return Decision::Deny,
                (ConflictMode::DenyOverrides, Decision::Permit) => permitted = true,
            }
        }
        if permitted {
            Decision::Permit
        } else {
            self.default
        }
    }
}
