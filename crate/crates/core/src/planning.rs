//! Attribute value hierarchies and hierarchy-driven log augmentation.
//!
//! A hierarchy is a set of direct edges `upper ⪰ lower` per attribute. Only
//! direct edges count: a state's neighbors differ from it in exactly one
//! attribute, by exactly one edge. A permitted state lends its permit to its
//! upper neighbors and a denied state lends its deny to its lower neighbors,
//! provided the neighbor is not already in the log.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use crate::abac::{AccessLog, AttributeSchema, Decision, LogEntry};
use crate::error::{Error, Result};
use crate::featurizer::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closeness {
    /// `v1 ⪰ v2`
    Upper,
    /// `v2 ⪰ v1`
    Lower,
    Incomparable,
    Equal,
}

/// Per-attribute direct edges `(upper, lower)`, as value indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueHierarchy {
    schema: Arc<AttributeSchema>,
    edges: Vec<Vec<(u32, u32)>>,
}

impl ValueHierarchy {
    pub fn empty(schema: Arc<AttributeSchema>) -> Self {
        let edges = vec![Vec::new(); schema.num_attributes()];
        ValueHierarchy { schema, edges }
    }

    /// Builds a hierarchy from symbolic `attr → [(upper, lower)]` edges.
    pub fn new<'a>(
        schema: Arc<AttributeSchema>,
        symbolic: impl IntoIterator<Item = (&'a str, Vec<(&'a str, &'a str)>)>,
    ) -> Result<Self> {
        let mut h = ValueHierarchy::empty(schema);
        for (attr, pairs) in symbolic {
            for (upper, lower) in pairs {
                h.add_edge(attr, upper, lower)?;
            }
        }
        h.check_acyclic()?;
        Ok(h)
    }

    fn add_edge(&mut self, attr: &str, upper: &str, lower: &str) -> Result<()> {
        let i = self.schema.attribute_index(attr).ok_or_else(|| {
            Error::SchemaMismatch(format!("hierarchy names unknown attribute '{attr}'"))
        })?;
        let lookup = |v: &str| {
            self.schema.value_index(i, v).ok_or_else(|| {
                Error::SchemaMismatch(format!("hierarchy value '{v}' not in V({attr})"))
            })
        };
        let (u, l) = (lookup(upper)?, lookup(lower)?);
        if u == l {
            return Err(Error::InvalidConfig(format!(
                "reflexive hierarchy pair ({upper}, {upper}) on '{attr}'"
            )));
        }
        if !self.edges[i].contains(&(u, l)) {
            self.edges[i].push((u, l));
        }
        Ok(())
    }

    fn check_acyclic(&self) -> Result<()> {
        for (attr, edges) in self.edges.iter().enumerate() {
            let n = self.schema.attributes()[attr].values.len();
            // Kahn's algorithm over the attribute's value graph
            let mut indegree = vec![0usize; n];
            for &(_, l) in edges {
                indegree[l as usize] += 1;
            }
            let mut stack: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
            let mut visited = 0;
            while let Some(v) = stack.pop() {
                visited += 1;
                for &(u, l) in edges {
                    if u as usize == v {
                        indegree[l as usize] -= 1;
                        if indegree[l as usize] == 0 {
                            stack.push(l as usize);
                        }
                    }
                }
            }
            if visited != n {
                return Err(Error::InvalidConfig(format!(
                    "hierarchy on '{}' contains a cycle",
                    self.schema.attributes()[attr].name
                )));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    /// Direct edges of attribute `attr` as `(upper, lower)` value indices.
    pub fn edges(&self, attr: usize) -> &[(u32, u32)] {
        &self.edges[attr]
    }

    pub fn is_empty(&self) -> bool {
        self.edges.iter().all(Vec::is_empty)
    }

    /// Every edge reversed; flips which way permits and denies propagate.
    pub fn inverted(&self) -> ValueHierarchy {
        ValueHierarchy {
            schema: Arc::clone(&self.schema),
            edges: self
                .edges
                .iter()
                .map(|e| e.iter().map(|&(u, l)| (l, u)).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, Vec<[&str; 2]>> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(i, edges)| {
                let def = &self.schema.attributes()[i];
                (
                    def.name.as_str(),
                    edges
                        .iter()
                        .map(|&(u, l)| {
                            [
                                def.values[u as usize].as_str(),
                                def.values[l as usize].as_str(),
                            ]
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("hierarchy serializes")
    }

    /// Parses `{ "attr": [["upper", "lower"], ...], ... }`.
    pub fn from_json(schema: Arc<AttributeSchema>, text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<[String; 2]>> = serde_json::from_str(text)?;
        let mut h = ValueHierarchy::empty(schema);
        for (attr, pairs) in &map {
            for [u, l] in pairs {
                h.add_edge(attr, u, l)?;
            }
        }
        h.check_acyclic()?;
        Ok(h)
    }

    pub fn load(schema: Arc<AttributeSchema>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(schema, &text)
    }
}

/// Relation between two values of one attribute under direct-edge semantics.
pub fn closeness(h: &ValueHierarchy, attr: &str, v1: &str, v2: &str) -> Result<Closeness> {
    let i = h
        .schema
        .attribute_index(attr)
        .ok_or_else(|| Error::SchemaMismatch(format!("unknown attribute '{attr}'")))?;
    let lookup = |v: &str| {
        h.schema
            .value_index(i, v)
            .ok_or_else(|| Error::SchemaMismatch(format!("value '{v}' not in V({attr})")))
    };
    let (a, b) = (lookup(v1)?, lookup(v2)?);
    Ok(if a == b {
        Closeness::Equal
    } else if h.edges[i].contains(&(a, b)) {
        Closeness::Upper
    } else if h.edges[i].contains(&(b, a)) {
        Closeness::Lower
    } else {
        Closeness::Incomparable
    })
}

fn neighbors(state: &State, h: &ValueHierarchy, upward: bool) -> Vec<State> {
    let mut out = Vec::new();
    for (attr, edges) in h.edges.iter().enumerate() {
        let current = state.values[attr];
        for &(u, l) in edges {
            let (from, to) = if upward { (l, u) } else { (u, l) };
            if current == from {
                let mut s = state.clone();
                s.values[attr] = to;
                out.push(s);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

pub fn get_upper_neighbors(state: &State, h: &ValueHierarchy) -> Vec<State> {
    neighbors(state, h, true)
}

pub fn get_lower_neighbors(state: &State, h: &ValueHierarchy) -> Vec<State> {
    neighbors(state, h, false)
}

fn check_schema(log: &AccessLog, h: &ValueHierarchy) -> Result<()> {
    if log.schema() != h.schema() {
        return Err(Error::SchemaMismatch(
            "log and hierarchy use different schemas".into(),
        ));
    }
    Ok(())
}

/// Appends first-level neighbor labels for every original entry. Iterates a
/// snapshot of the input, so added entries never propagate further.
pub fn plan_augment(log: &AccessLog, h: &ValueHierarchy) -> Result<AccessLog> {
    check_schema(log, h)?;
    let mut planner = Planner::new(h.clone());
    for e in log.entries() {
        planner.mark_seen(&e.state);
    }
    let mut entries = log.entries().to_vec();
    for e in log.entries() {
        for (state, decision) in planner.propagate(&e.state, e.decision) {
            entries.push(LogEntry { state, decision });
        }
    }
    Ok(AccessLog::from_entries_unchecked(
        Arc::clone(log.schema()),
        entries,
    ))
}

/// Incremental planning over a growing log: remembers which states the log
/// already holds and emits inferred labels for unseen neighbors.
#[derive(Clone, Debug)]
pub struct Planner {
    hierarchy: ValueHierarchy,
    seen: HashSet<State>,
}

impl Planner {
    pub fn new(hierarchy: ValueHierarchy) -> Self {
        Planner {
            hierarchy,
            seen: HashSet::new(),
        }
    }

    pub fn hierarchy(&self) -> &ValueHierarchy {
        &self.hierarchy
    }

    pub fn mark_seen(&mut self, state: &State) {
        if !self.seen.contains(state) {
            self.seen.insert(state.clone());
        }
    }

    pub fn is_seen(&self, state: &State) -> bool {
        self.seen.contains(state)
    }

    /// Labels inferred from `(state, decision)`; each returned state is marked seen.
    pub fn propagate(&mut self, state: &State, decision: Decision) -> Vec<(State, Decision)> {
        let candidates = match decision {
            Decision::Permit => get_upper_neighbors(state, &self.hierarchy),
            Decision::Deny => get_lower_neighbors(state, &self.hierarchy),
        };
        let mut out = Vec::new();
        for s in candidates {
            if self.seen.insert(s.clone()) {
                out.push((s, decision));
            }
        }
        out
    }

    /// Records a freshly labeled state and returns the labels it implies.
    pub fn observe(&mut self, state: &State, decision: Decision) -> Vec<(State, Decision)> {
        self.mark_seen(state);
        self.propagate(state, decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abac::{AttributeDef, AttributeKind};

    fn schema() -> Arc<AttributeSchema> {
        Arc::new(
            AttributeSchema::new(
                vec![
                    AttributeDef::new(
                        "age_range",
                        AttributeKind::User,
                        ["minor", "teenager", "adult"],
                    ),
                    AttributeDef::new(
                        "Time",
                        AttributeKind::Environment,
                        ["day", "night", "midnight"],
                    ),
                ],
                ["tv_on"],
            )
            .unwrap(),
        )
    }

    fn state(age: u32, time: u32) -> State {
        State {
            values: vec![age, time],
            op: 0,
        }
    }

    #[test]
    fn closeness_direct_edges_only() {
        let h = ValueHierarchy::new(
            schema(),
            [(
                "age_range",
                vec![("teenager", "minor"), ("adult", "teenager")],
            )],
        )
        .unwrap();
        assert_eq!(
            closeness(&h, "age_range", "teenager", "minor").unwrap(),
            Closeness::Upper
        );
        assert_eq!(
            closeness(&h, "age_range", "minor", "teenager").unwrap(),
            Closeness::Lower
        );
        assert_eq!(
            closeness(&h, "age_range", "adult", "adult").unwrap(),
            Closeness::Equal
        );
        // transitively adult ⪰ minor, but not a direct edge
        assert_eq!(
            closeness(&h, "age_range", "adult", "minor").unwrap(),
            Closeness::Incomparable
        );
        assert!(closeness(&h, "age_range", "adult", "elder").is_err());
    }

    #[test]
    fn rejects_cycles_and_reflexive_pairs() {
        assert!(ValueHierarchy::new(
            schema(),
            [(
                "age_range",
                vec![("teenager", "minor"), ("minor", "teenager")]
            )]
        )
        .is_err());
        assert!(ValueHierarchy::new(schema(), [("age_range", vec![("minor", "minor")])]).is_err());
        assert!(ValueHierarchy::new(schema(), [("Weather", vec![("sun", "rain")])]).is_err());
    }

    #[test]
    fn worked_neighbor_example() {
        let h =
            ValueHierarchy::new(schema(), [("age_range", vec![("teenager", "minor")])]).unwrap();
        let s = state(0, 0);
        assert_eq!(get_upper_neighbors(&s, &h), vec![state(1, 0)]);
        assert!(get_lower_neighbors(&s, &h).is_empty());
        let none = ValueHierarchy::empty(schema());
        assert!(get_upper_neighbors(&s, &none).is_empty());
        assert!(get_lower_neighbors(&s, &none).is_empty());
    }

    #[test]
    fn two_hierarchical_attributes() {
        let h = ValueHierarchy::new(
            schema(),
            [
                ("age_range", vec![("teenager", "minor")]),
                ("Time", vec![("night", "midnight")]),
            ],
        )
        .unwrap();
        assert_eq!(
            get_upper_neighbors(&state(0, 2), &h),
            vec![state(0, 1), state(1, 2)]
        );
    }

    #[test]
    fn augment_examples() {
        let schema = schema();
        let h = ValueHierarchy::new(
            Arc::clone(&schema),
            [("age_range", vec![("teenager", "minor")])],
        )
        .unwrap();
        let mut log = AccessLog::new(Arc::clone(&schema));
        log.push_state(state(0, 0), Decision::Permit).unwrap();
        let out = plan_augment(&log, &h).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(
            out.entries()[1],
            LogEntry {
                state: state(1, 0),
                decision: Decision::Permit
            }
        );

        log.push_state(state(1, 0), Decision::Deny).unwrap();
        let out = plan_augment(&log, &h).unwrap();
        assert_eq!(out, log);
    }

    #[test]
    fn snapshot_iteration_does_not_cascade() {
        let schema = schema();
        let h = ValueHierarchy::new(
            Arc::clone(&schema),
            [(
                "age_range",
                vec![("teenager", "minor"), ("adult", "teenager")],
            )],
        )
        .unwrap();
        let mut log = AccessLog::new(Arc::clone(&schema));
        log.push_state(state(0, 0), Decision::Permit).unwrap();
        let out = plan_augment(&log, &h).unwrap();
        // only teenager is added; adult would need a second hop
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn json_round_trip_and_inversion() {
        let schema = schema();
        let h = ValueHierarchy::new(Arc::clone(&schema), [("Time", vec![("night", "midnight")])])
            .unwrap();
        let back = ValueHierarchy::from_json(Arc::clone(&schema), &h.to_json()).unwrap();
        assert_eq!(back, h);
        let inv = h.inverted();
        assert_eq!(
            closeness(&inv, "Time", "midnight", "night").unwrap(),
            Closeness::Upper
        );
    }
}
