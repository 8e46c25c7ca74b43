use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name reserved for the operation column of log files; no attribute may use it.
pub const OPERATION_COLUMN: &str = "operation";
/// Name reserved for the decision column of log files.
pub const DECISION_COLUMN: &str = "decision";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    User,
    Object,
    Environment,
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::User => "user",
            AttributeKind::Object => "object",
            AttributeKind::Environment => "environment",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    pub values: Vec<String>,
}

impl AttributeDef {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        kind: AttributeKind,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        AttributeDef {
            name: name.into(),
            kind,
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// The attribute universe of an ABAC system: every attribute with its kind and
/// finite value range, plus the set of operations.
///
/// Values and operations are interned; index order is declaration order.
#[derive(Clone, Debug)]
pub struct AttributeSchema {
    attributes: Vec<AttributeDef>,
    operations: Vec<String>,
    attr_index: HashMap<String, usize>,
    value_index: Vec<HashMap<String, u32>>,
    op_index: HashMap<String, u32>,
}

impl PartialEq for AttributeSchema {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes && self.operations == other.operations
    }
}

impl Eq for AttributeSchema {}

impl AttributeSchema {
    pub fn new<S: Into<String>>(
        attributes: Vec<AttributeDef>,
        operations: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let operations: Vec<String> = operations.into_iter().map(Into::into).collect();
        if operations.is_empty() {
            return Err(Error::InvalidSchema("operation set is empty".into()));
        }
        let mut op_index = HashMap::with_capacity(operations.len());
        for (i, op) in operations.iter().enumerate() {
            if op == "*" {
                return Err(Error::InvalidSchema(
                    "'*' is reserved for the wildcard operation".into(),
                ));
            }
            if op_index.insert(op.clone(), i as u32).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate operation '{op}'")));
            }
        }

        let mut attr_index = HashMap::with_capacity(attributes.len());
        let mut value_index = Vec::with_capacity(attributes.len());
        for (i, attr) in attributes.iter().enumerate() {
            if attr.name.is_empty() {
                return Err(Error::InvalidSchema("empty attribute name".into()));
            }
            if attr.name == OPERATION_COLUMN || attr.name == DECISION_COLUMN {
                return Err(Error::InvalidSchema(format!(
                    "attribute name '{}' is reserved",
                    attr.name
                )));
            }
            if attr_index.insert(attr.name.clone(), i).is_some() {
                return Err(Error::InvalidSchema(format!(
                    "duplicate attribute '{}'",
                    attr.name
                )));
            }
            if attr.values.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "attribute '{}' has an empty value range",
                    attr.name
                )));
            }
            let mut values = HashMap::with_capacity(attr.values.len());
            for (j, v) in attr.values.iter().enumerate() {
                if values.insert(v.clone(), j as u32).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "attribute '{}' lists value '{v}' twice",
                        attr.name
                    )));
                }
            }
            value_index.push(values);
        }

        Ok(AttributeSchema {
            attributes,
            operations,
            attr_index,
            value_index,
            op_index,
        })
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn operations(&self) -> &[String] {
        &self.operations
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attr_index.get(name).copied()
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attribute_index(name).map(|i| &self.attributes[i])
    }

    pub fn value_index(&self, attr: usize, value: &str) -> Option<u32> {
        self.value_index.get(attr)?.get(value).copied()
    }

    pub fn operation_index(&self, op: &str) -> Option<u32> {
        self.op_index.get(op).copied()
    }

    pub fn contains_value(&self, attr: &str, value: &str) -> bool {
        self.attribute_index(attr)
            .and_then(|i| self.value_index(i, value))
            .is_some()
    }

    /// Attribute indices of the given kind, in declaration order.
    pub fn indices_of_kind(&self, kind: AttributeKind) -> impl Iterator<Item = usize> + '_ {
        self.attributes
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.kind == kind)
            .map(|(i, _)| i)
    }

    /// Σ|V(attr)| + |OP|.
    pub fn total_values(&self) -> usize {
        self.attributes
            .iter()
            .map(|a| a.values.len())
            .sum::<usize>()
            + self.operations.len()
    }

    /// Number of distinct requests: Π|V(attr)| · |OP|.
    pub fn enumeration_size(&self) -> u128 {
        self.attributes
            .iter()
            .map(|a| a.values.len() as u128)
            .product::<u128>()
            * self.operations.len() as u128
    }

    /// Merges two schemas by attribute name, unioning value ranges and
    /// operations. Attributes of `self` keep their position; new ones are appended.
    pub fn union(&self, other: &AttributeSchema) -> Result<AttributeSchema> {
        let mut attributes = self.attributes.clone();
        for attr in &other.attributes {
            match self.attribute_index(&attr.name) {
                Some(i) => {
                    let merged = &mut attributes[i];
                    if merged.kind != attr.kind {
                        return Err(Error::SchemaMismatch(format!(
                            "attribute '{}' is {} on one side and {} on the other",
                            attr.name, merged.kind, attr.kind
                        )));
                    }
                    let seen: HashSet<String> = merged.values.iter().cloned().collect();
                    merged
                        .values
                        .extend(attr.values.iter().filter(|v| !seen.contains(*v)).cloned());
                }
                None => attributes.push(attr.clone()),
            }
        }
        let mut operations = self.operations.clone();
        let seen: HashSet<&String> = self.operations.iter().collect();
        operations.extend(
            other
                .operations
                .iter()
                .filter(|o| !seen.contains(o))
                .cloned(),
        );
        AttributeSchema::new(attributes, operations)
    }
}

/// Concrete values for a set of attributes (attribute name → value).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeAssignment(pub BTreeMap<String, String>);

impl AttributeAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, attr: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.insert(attr.into(), value.into());
        self
    }

    pub fn get(&self, attr: &str) -> Option<&str> {
        self.0.get(attr).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for AttributeAssignment {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        AttributeAssignment(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

/// Conjunction of `attribute = value` constraints. At most one pair per
/// attribute; the empty filter matches everything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeFilter(pub BTreeMap<String, String>);

impl AttributeFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, attr: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.insert(attr.into(), value.into());
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset_of(&self, other: &AttributeFilter) -> bool {
        self.0.iter().all(|(k, v)| other.0.get(k) == Some(v))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for AttributeFilter {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        AttributeFilter(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

/// True iff every `(attr, v)` of the filter has `assignment[attr] = v`.
///
/// Fails when the filter names an attribute or value unknown to the schema.
pub fn filter_matches(
    schema: &AttributeSchema,
    filter: &AttributeFilter,
    assignment: &AttributeAssignment,
) -> Result<bool> {
    for (attr, value) in filter.iter() {
        if !schema.contains_value(attr, value) {
            return Err(Error::SchemaMismatch(format!(
                "filter pair ({attr}, {value}) is not in the schema"
            )));
        }
    }
    for (attr, _) in assignment.iter() {
        if schema.attribute_index(attr).is_none() {
            return Err(Error::SchemaMismatch(format!(
                "assignment names unknown attribute '{attr}'"
            )));
        }
    }
    Ok(filter
        .iter()
        .all(|(attr, value)| assignment.get(attr) == Some(value)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> AttributeSchema {
        AttributeSchema::new(
            vec![
                AttributeDef::new("Role", AttributeKind::User, ["mother", "child"]),
                AttributeDef::new("Time", AttributeKind::Environment, ["day", "night"]),
            ],
            ["play_music"],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_schemas() {
        let empty_ops: Vec<&str> = vec![];
        assert!(AttributeSchema::new(vec![], empty_ops).is_err());
        let dup = vec![
            AttributeDef::new("A", AttributeKind::User, ["x"]),
            AttributeDef::new("A", AttributeKind::Object, ["y"]),
        ];
        assert!(AttributeSchema::new(dup, ["op"]).is_err());
        let empty_range = vec![AttributeDef::new(
            "A",
            AttributeKind::User,
            Vec::<String>::new(),
        )];
        assert!(AttributeSchema::new(empty_range, ["op"]).is_err());
        let reserved = vec![AttributeDef::new("operation", AttributeKind::User, ["x"])];
        assert!(AttributeSchema::new(reserved, ["op"]).is_err());
    }

    #[test]
    fn filter_semantics() {
        let s = toy();
        let a = AttributeAssignment::new()
            .with("Role", "mother")
            .with("Time", "day");
        let b = AttributeAssignment::new()
            .with("Role", "child")
            .with("Time", "day");
        assert!(filter_matches(&s, &AttributeFilter::new(), &a).unwrap());
        let f = AttributeFilter::new().with("Role", "mother");
        assert!(filter_matches(&s, &f, &a).unwrap());
        assert!(!filter_matches(&s, &f, &b).unwrap());
        let unknown = AttributeFilter::new().with("Weather", "rain");
        assert!(matches!(
            filter_matches(&s, &unknown, &a),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn union_merges_ranges() {
        let a = toy();
        let b = AttributeSchema::new(
            vec![
                AttributeDef::new("Time", AttributeKind::Environment, ["night", "morning"]),
                AttributeDef::new("Location", AttributeKind::Object, ["yard"]),
            ],
            ["play_music", "answer_door"],
        )
        .unwrap();
        let u = a.union(&b).unwrap();
        assert_eq!(
            u.attribute("Time").unwrap().values,
            ["day", "night", "morning"]
        );
        assert_eq!(u.num_attributes(), 3);
        assert_eq!(u.operations(), ["play_music", "answer_door"]);

        let clash = AttributeSchema::new(
            vec![AttributeDef::new("Time", AttributeKind::User, ["day"])],
            ["x"],
        )
        .unwrap();
        assert!(a.union(&clash).is_err());
    }
}
