use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeAssignment, AttributeKind, AttributeSchema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Permit,
    Deny,
}

impl Decision {
    pub fn opposite(self) -> Decision {
        match self {
            Decision::Permit => Decision::Deny,
            Decision::Deny => Decision::Permit,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Permit => "permit",
            Decision::Deny => "deny",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "permit" => Ok(Decision::Permit),
            "deny" => Ok(Decision::Deny),
            other => Err(format!(
                "invalid decision '{other}' (expected permit or deny)"
            )),
        }
    }
}

/// A request `q = <u, o, op, ea>`: the requesting user's attributes, the
/// object's attributes, the operation, and the environment attributes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessRequest {
    pub user: AttributeAssignment,
    pub object: AttributeAssignment,
    pub operation: String,
    pub environment: AttributeAssignment,
}

impl AccessRequest {
    pub fn assignment(&self, kind: AttributeKind) -> &AttributeAssignment {
        match kind {
            AttributeKind::User => &self.user,
            AttributeKind::Object => &self.object,
            AttributeKind::Environment => &self.environment,
        }
    }

    pub(crate) fn assignment_mut(&mut self, kind: AttributeKind) -> &mut AttributeAssignment {
        match kind {
            AttributeKind::User => &mut self.user,
            AttributeKind::Object => &mut self.object,
            AttributeKind::Environment => &mut self.environment,
        }
    }

    /// Looks up an attribute across all three assignments.
    pub fn value(&self, attr: &str) -> Option<&str> {
        self.user
            .get(attr)
            .or_else(|| self.object.get(attr))
            .or_else(|| self.environment.get(attr))
    }

    /// Checks that each assignment covers exactly the schema's attributes of
    /// its kind with in-range values, and that the operation exists.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if schema.operation_index(&self.operation).is_none() {
            return Err(Error::SchemaMismatch(format!(
                "unknown operation '{}'",
                self.operation
            )));
        }
        for kind in [
            AttributeKind::User,
            AttributeKind::Object,
            AttributeKind::Environment,
        ] {
            let assignment = self.assignment(kind);
            let mut expected = 0;
            for i in schema.indices_of_kind(kind) {
                expected += 1;
                let def = &schema.attributes()[i];
                let value = assignment.get(&def.name).ok_or_else(|| {
                    Error::SchemaMismatch(format!("{kind} attribute '{}' is unassigned", def.name))
                })?;
                if schema.value_index(i, value).is_none() {
                    return Err(Error::SchemaMismatch(format!(
                        "value '{value}' is not in the range of '{}'",
                        def.name
                    )));
                }
            }
            if assignment.len() != expected {
                return Err(Error::SchemaMismatch(format!(
                    "{kind} assignment has attributes outside the schema"
                )));
            }
        }
        Ok(())
    }
}
