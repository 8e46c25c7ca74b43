//! Requests ⇄ bandit states, and states → sparse one-hot feature vectors.
//!
//! A [`State`] is the request's attribute values in schema declaration order
//! followed by the operation, stored as value indices. Featurization assigns
//! one slot per `(attribute, value)` pair and per operation, either by exact
//! indexing or by FNV-1a hashing into a power-of-two space.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abac::{AccessRequest, AttributeSchema, OPERATION_COLUMN};
use crate::error::{Error, Result};

/// Encoded bandit state `[ua, oa, ea, op]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    /// Value index per schema attribute, declaration order.
    pub values: Vec<u32>,
    pub op: u32,
}

impl State {
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.values.len() != schema.num_attributes() {
            return Err(Error::SchemaMismatch(format!(
                "state has {} attribute values, schema has {}",
                self.values.len(),
                schema.num_attributes()
            )));
        }
        for (i, (&v, def)) in self.values.iter().zip(schema.attributes()).enumerate() {
            if v as usize >= def.values.len() {
                return Err(Error::SchemaMismatch(format!(
                    "value index {v} out of range for attribute {i} ('{}')",
                    def.name
                )));
            }
        }
        if self.op as usize >= schema.operations().len() {
            return Err(Error::SchemaMismatch(format!(
                "operation index {} out of range",
                self.op
            )));
        }
        Ok(())
    }

    /// Symbolic values in state order, operation last.
    pub fn symbols<'a>(&self, schema: &'a AttributeSchema) -> Vec<&'a str> {
        let mut out: Vec<&str> = self
            .values
            .iter()
            .zip(schema.attributes())
            .map(|(&v, def)| def.values[v as usize].as_str())
            .collect();
        out.push(schema.operations()[self.op as usize].as_str());
        out
    }
}

pub fn get_state(schema: &AttributeSchema, request: &AccessRequest) -> Result<State> {
    request.validate(schema)?;
    let values = schema
        .attributes()
        .iter()
        .enumerate()
        .map(|(i, def)| {
            let value = request
                .assignment(def.kind)
                .get(&def.name)
                .expect("validated request covers the schema");
            schema.value_index(i, value).expect("validated value")
        })
        .collect();
    let op = schema
        .operation_index(&request.operation)
        .expect("validated operation");
    Ok(State { values, op })
}

/// Inverse of [`get_state`]. Panics if `state` is not valid for `schema`.
pub fn get_request(schema: &AttributeSchema, state: &State) -> AccessRequest {
    let mut request = AccessRequest {
        operation: schema.operations()[state.op as usize].clone(),
        ..AccessRequest::default()
    };
    for (def, &v) in schema.attributes().iter().zip(&state.values) {
        request
            .assignment_mut(def.kind)
            .0
            .insert(def.name.clone(), def.values[v as usize].clone());
    }
    request
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Exact,
    Hashed,
}

pub const DEFAULT_HASH_SIZE: usize = 1 << 18;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn hashed_slot(attr: &str, value: &str, size: usize) -> u32 {
    let mut key = Vec::with_capacity(attr.len() + value.len() + 1);
    key.extend_from_slice(attr.as_bytes());
    key.push(b'=');
    key.extend_from_slice(value.as_bytes());
    (fnv1a64(&key) % size as u64) as u32
}

/// Slot tables mapping every `(attribute, value)` pair and operation to a weight index.
#[derive(Clone, Debug)]
pub struct FeatureSpace {
    schema: Arc<AttributeSchema>,
    mode: FeatureMode,
    dim: usize,
    value_slots: Vec<Vec<u32>>,
    op_slots: Vec<u32>,
}

impl FeatureSpace {
    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    /// Number of weight slots.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value_slot(&self, attr: usize, value: u32) -> u32 {
        self.value_slots[attr][value as usize]
    }

    pub fn op_slot(&self, op: u32) -> u32 {
        self.op_slots[op as usize]
    }
}

/// Exact mode uses `Σ|V(attr)| + |OP|` slots; hashed mode uses `hash_size`
/// (default 2^18), which must be a power of two.
pub fn build_feature_space(
    schema: Arc<AttributeSchema>,
    mode: FeatureMode,
    hash_size: Option<usize>,
) -> Result<FeatureSpace> {
    match mode {
        FeatureMode::Exact => {
            let mut next = 0u32;
            let value_slots = schema
                .attributes()
                .iter()
                .map(|def| {
                    def.values
                        .iter()
                        .map(|_| {
                            next += 1;
                            next - 1
                        })
                        .collect()
                })
                .collect();
            let op_slots = schema
                .operations()
                .iter()
                .map(|_| {
                    next += 1;
                    next - 1
                })
                .collect();
            Ok(FeatureSpace {
                schema,
                mode,
                dim: next as usize,
                value_slots,
                op_slots,
            })
        }
        FeatureMode::Hashed => {
            let size = hash_size.unwrap_or(DEFAULT_HASH_SIZE);
            if !size.is_power_of_two() || size > u32::MAX as usize {
                return Err(Error::InvalidConfig(format!(
                    "hash size {size} is not a power of two"
                )));
            }
            let value_slots = schema
                .attributes()
                .iter()
                .map(|def| {
                    def.values
                        .iter()
                        .map(|v| hashed_slot(&def.name, v, size))
                        .collect()
                })
                .collect();
            let op_slots = schema
                .operations()
                .iter()
                .map(|op| hashed_slot(OPERATION_COLUMN, op, size))
                .collect();
            Ok(FeatureSpace {
                schema,
                mode,
                dim: size,
                value_slots,
                op_slots,
            })
        }
    }
}

/// Sparse vector with strictly increasing slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Builds a vector from arbitrary `(slot, weight)` pairs, summing repeated slots.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(slot, _)| slot);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (slot, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == slot => last.1 += w,
                _ => entries.push((slot, w)),
            }
        }
        FeatureVector { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(s, w)| (s as usize, w))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_slot(&self) -> Option<usize> {
        self.entries.last().map(|&(s, _)| s as usize)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    pub fn scaled(&self, factor: f64) -> FeatureVector {
        FeatureVector {
            entries: self.entries.iter().map(|&(s, w)| (s, w * factor)).collect(),
        }
    }
}

pub fn featurize(state: &State, space: &FeatureSpace) -> Result<FeatureVector> {
    state.validate(&space.schema)?;
    let mut pairs: Vec<(u32, f64)> = state
        .values
        .iter()
        .enumerate()
        .map(|(attr, &v)| (space.value_slots[attr][v as usize], 1.0))
        .collect();
    pairs.push((space.op_slots[state.op as usize], 1.0));
    Ok(FeatureVector::from_pairs(pairs))
}

/// Mixed-radix enumeration of the states matching a set of fixed values, in
/// lexicographic order of `[attr_0, …, attr_n, op]` (operation fastest).
#[derive(Clone, Debug)]
pub struct StateEnumerator {
    fixed: Vec<Option<u32>>,
    radices: Vec<u32>,
    count: u128,
}

impl StateEnumerator {
    /// `fixed[i]` pins attribute `i`; `fixed_op` pins the operation.
    pub fn new(schema: &AttributeSchema, fixed: Vec<Option<u32>>, fixed_op: Option<u32>) -> Self {
        assert_eq!(fixed.len(), schema.num_attributes());
        let mut radices: Vec<u32> = schema
            .attributes()
            .iter()
            .map(|d| d.values.len() as u32)
            .collect();
        radices.push(schema.operations().len() as u32);
        let mut fixed = fixed;
        fixed.push(fixed_op);
        let count = radices
            .iter()
            .zip(&fixed)
            .map(|(&r, f)| if f.is_some() { 1 } else { r as u128 })
            .product();
        StateEnumerator {
            fixed,
            radices,
            count,
        }
    }

    /// Every state of the schema.
    pub fn all(schema: &AttributeSchema) -> Self {
        Self::new(schema, vec![None; schema.num_attributes()], None)
    }

    pub fn count(&self) -> u128 {
        self.count
    }

    /// The `index`-th matching state. Panics if `index >= count`.
    pub fn nth(&self, mut index: u128) -> State {
        assert!(index < self.count, "state index out of range");
        let mut digits = vec![0u32; self.radices.len()];
        for pos in (0..self.radices.len()).rev() {
            digits[pos] = match self.fixed[pos] {
                Some(v) => v,
                None => {
                    let r = self.radices[pos] as u128;
                    let d = (index % r) as u32;
                    index /= r;
                    d
                }
            };
        }
        let op = digits.pop().expect("operation digit");
        State { values: digits, op }
    }

    pub fn iter(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.count).map(move |i| self.nth(i))
    }
}
