//! Policy initialization: general rules, per-user defaults, per-capability
//! defaults and past logs, each compiled to full-information examples that
//! pre-train the learner before any interaction.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abac::{
    validate_policy, AbacPolicy, AbacRule, AccessLog, AttributeFilter, AttributeKind,
    AttributeSchema, Decision, OpPattern,
};
use crate::error::{Error, Result};
use crate::featurizer::{featurize, FeatureSpace, State, StateEnumerator};
use crate::learners::Agent;

pub const DEFAULT_ENUMERATION_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct WarmstartExample {
    pub state: State,
    pub decision: Decision,
    pub weight: f64,
}

/// Enumeration bound and sampling seed shared by the generated techniques.
#[derive(Clone, Copy, Debug)]
pub struct Enumeration {
    pub cap: usize,
    pub seed: u64,
}

impl Default for Enumeration {
    fn default() -> Self {
        Enumeration {
            cap: DEFAULT_ENUMERATION_CAP,
            seed: 0,
        }
    }
}

/// States matching `constraints`; a uniform sample of exactly `cap` when there are more.
fn matching_states(
    schema: &AttributeSchema,
    constraints: &[(usize, u32)],
    op: Option<u32>,
    limits: Enumeration,
    salt: u64,
) -> Vec<State> {
    let mut fixed = vec![None; schema.num_attributes()];
    for &(attr, v) in constraints {
        fixed[attr] = Some(v);
    }
    let en = StateEnumerator::new(schema, fixed, op);
    if en.count() <= limits.cap as u128 {
        return en.iter().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut picked: Vec<u128> = Vec::with_capacity(limits.cap);
    let mut seen = std::collections::HashSet::with_capacity(limits.cap);
    // rejection sampling without replacement; cap ≪ count here
    while picked.len() < limits.cap {
        let i = rand::Rng::random_range(&mut rng, 0..en.count());
        if seen.insert(i) {
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked.into_iter().map(|i| en.nth(i)).collect()
}

fn filter_constraints(
    schema: &AttributeSchema,
    filter: &AttributeFilter,
    kind: Option<AttributeKind>,
) -> Result<Vec<(usize, u32)>> {
    filter
        .iter()
        .map(|(attr, value)| {
            let i = schema
                .attribute_index(attr)
                .ok_or_else(|| Error::SchemaMismatch(format!("unknown attribute '{attr}'")))?;
            if let Some(kind) = kind {
                if schema.attributes()[i].kind != kind {
                    return Err(Error::SchemaMismatch(format!(
                        "'{attr}' is not a {kind} attribute"
                    )));
                }
            }
            let v = schema.value_index(i, value).ok_or_else(|| {
                Error::SchemaMismatch(format!("value '{value}' not in V({attr})"))
            })?;
            Ok((i, v))
        })
        .collect()
}

/// Collapses identical `(state, decision)` pairs, first occurrence order kept.
fn dedup(examples: Vec<WarmstartExample>) -> Vec<WarmstartExample> {
    let mut seen = std::collections::HashSet::new();
    examples
        .into_iter()
        .filter(|e| seen.insert((e.state.clone(), e.decision)))
        .collect()
}

/// Every state matched by each rule, labeled with the rule's decision.
pub fn init_from_general_rules(
    rules: &[AbacRule],
    schema: &std::sync::Arc<AttributeSchema>,
    limits: Enumeration,
) -> Result<Vec<WarmstartExample>> {
    let probe = AbacPolicy::new(std::sync::Arc::clone(schema), rules.to_vec());
    if let Some(v) = validate_policy(&probe).into_iter().next() {
        return Err(Error::SchemaMismatch(v.to_string()));
    }
    let mut out = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        let mut constraints = filter_constraints(schema, &rule.uaf, Some(AttributeKind::User))?;
        constraints.extend(filter_constraints(
            schema,
            &rule.oaf,
            Some(AttributeKind::Object),
        )?);
        constraints.extend(filter_constraints(
            schema,
            &rule.eaf,
            Some(AttributeKind::Environment),
        )?);
        let op = match &rule.op {
            OpPattern::Any => None,
            OpPattern::Named(name) => schema.operation_index(name),
        };
        out.extend(
            matching_states(schema, &constraints, op, limits, i as u64)
                .into_iter()
                .map(|state| WarmstartExample {
                    state,
                    decision: rule.decision,
                    weight: 1.0,
                }),
        );
    }
    Ok(dedup(out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserDefault {
    pub filter: AttributeFilter,
    pub decision: Decision,
}

/// Default decisions for users matching each filter, over every object,
/// operation and environment.
pub fn init_from_user_defaults(
    defaults: &[UserDefault],
    schema: &AttributeSchema,
    limits: Enumeration,
) -> Result<Vec<WarmstartExample>> {
    let mut by_filter: HashMap<&AttributeFilter, Decision> = HashMap::new();
    for d in defaults {
        if let Some(prev) = by_filter.insert(&d.filter, d.decision) {
            if prev != d.decision {
                return Err(Error::Conflict(format!(
                    "user filter {:?} is both {prev} and {}",
                    d.filter.0, d.decision
                )));
            }
        }
    }
    let mut out = Vec::new();
    for (i, d) in defaults.iter().enumerate() {
        let constraints = filter_constraints(schema, &d.filter, Some(AttributeKind::User))?;
        out.extend(
            matching_states(schema, &constraints, None, limits, 1000 + i as u64)
                .into_iter()
                .map(|state| WarmstartExample {
                    state,
                    decision: d.decision,
                    weight: 1.0,
                }),
        );
    }
    Ok(dedup(out))
}

/// Default decision per operation, over every user, object and environment.
pub fn init_from_capability_defaults(
    defaults: &BTreeMap<String, Decision>,
    schema: &AttributeSchema,
    limits: Enumeration,
) -> Result<Vec<WarmstartExample>> {
    let mut out = Vec::new();
    for (i, (op, &decision)) in defaults.iter().enumerate() {
        let op_index = schema
            .operation_index(op)
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown operation '{op}'")))?;
        out.extend(
            matching_states(schema, &[], Some(op_index), limits, 2000 + i as u64)
                .into_iter()
                .map(|state| WarmstartExample {
                    state,
                    decision,
                    weight: 1.0,
                }),
        );
    }
    Ok(out)
}

/// One example per log entry, in log order; duplicates are kept.
pub fn init_from_log(past: &AccessLog, schema: &AttributeSchema) -> Result<Vec<WarmstartExample>> {
    if past.schema().as_ref() != schema {
        return Err(Error::SchemaMismatch(
            "past log uses a different schema".into(),
        ));
    }
    Ok(past
        .entries()
        .iter()
        .map(|e| WarmstartExample {
            state: e.state.clone(),
            decision: e.decision,
            weight: 1.0,
        })
        .collect())
}

/// Unions example sets. Per `(state, decision)` the heaviest technique's
/// total weight survives, so repeats inside one log still count while
/// overlap between techniques does not. A state labeled both ways keeps
/// both labels at half weight.
pub fn merge_examples(sets: Vec<Vec<WarmstartExample>>) -> Vec<WarmstartExample> {
    let mut order: Vec<(State, Decision)> = Vec::new();
    let mut weight: HashMap<(State, Decision), f64> = HashMap::new();
    for set in sets {
        let mut local: HashMap<(State, Decision), f64> = HashMap::new();
        for e in set {
            *local.entry((e.state, e.decision)).or_insert(0.0) += e.weight;
        }
        let mut keys: Vec<_> = local.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, w) in keys {
            match weight.get_mut(&key) {
                Some(existing) => *existing = existing.max(w),
                None => {
                    order.push(key.clone());
                    weight.insert(key, w);
                }
            }
        }
    }
    order
        .into_iter()
        .map(|(state, decision)| {
            let mut w = weight[&(state.clone(), decision)];
            if weight.contains_key(&(state.clone(), decision.opposite())) {
                w *= 0.5;
            }
            WarmstartExample {
                state,
                decision,
                weight: w,
            }
        })
        .collect()
}

/// Full-information pre-training: `passes` sweeps, each in a seeded shuffle.
pub fn apply_warmstart(
    agent: &mut Agent,
    examples: &[WarmstartExample],
    space: &FeatureSpace,
    passes: usize,
    seed: u64,
) -> Result<()> {
    let features = examples
        .iter()
        .map(|e| featurize(&e.state, space))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..passes {
        order.shuffle(&mut rng);
        for &i in &order {
            agent.supervised_update(&features[i], examples[i].decision, examples[i].weight)?;
        }
    }
    Ok(())
}

/// Warm-start spec file; every section optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmstartSpec {
    #[serde(default)]
    pub general_rules: Vec<AbacRule>,
    #[serde(default)]
    pub user_defaults: Vec<UserDefault>,
    #[serde(default)]
    pub capability_defaults: BTreeMap<String, Decision>,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
}

impl WarmstartSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: WarmstartSpec = serde_json::from_str(&text)?;
        if let (Some(log), Some(dir)) = (&spec.log_path, path.parent()) {
            if log.is_relative() {
                spec.log_path = Some(dir.join(log));
            }
        }
        Ok(spec)
    }

    /// All four techniques' examples, merged.
    pub fn examples(
        &self,
        schema: &std::sync::Arc<AttributeSchema>,
        limits: Enumeration,
    ) -> Result<Vec<WarmstartExample>> {
        let mut sets = vec![
            init_from_general_rules(&self.general_rules, schema, limits)?,
            init_from_user_defaults(&self.user_defaults, schema, limits)?,
            init_from_capability_defaults(&self.capability_defaults, schema, limits)?,
        ];
        if let Some(path) = &self.log_path {
            let past = crate::data::load_log_with_schema(path, schema)?;
            sets.push(init_from_log(&past, schema)?);
        }
        Ok(merge_examples(sets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manual_policy_schema;
    use std::sync::Arc;

    #[test]
    fn general_rule_enumeration_count() {
        let schema = manual_policy_schema("m1").unwrap();
        let rule = AbacRule::new(OpPattern::named("lights_on_off"), Decision::Permit)
            .object("Location", "inside_home");
        let ex = init_from_general_rules(&[rule], &schema, Enumeration::default()).unwrap();
        assert_eq!(ex.len(), 4 * 5 * 7);
        assert!(ex.iter().all(|e| e.decision == Decision::Permit));
        assert!(
            init_from_general_rules(&[], &schema, Enumeration::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn overlapping_rules_dedup() {
        let schema = manual_policy_schema("m1").unwrap();
        let a =
            AbacRule::new(OpPattern::named("play_music"), Decision::Permit).user("Role", "mother");
        let b = AbacRule::new(OpPattern::named("play_music"), Decision::Permit).env("Time", "day");
        let ex = init_from_general_rules(&[a, b], &schema, Enumeration::default()).unwrap();
        // |mother| + |day| − |mother ∧ day| over the remaining free attributes
        assert_eq!(ex.len(), 4 * 4 * 7 + 5 * 4 * 7 - 4 * 7);
        assert!(ex.iter().all(|e| e.decision == Decision::Permit));
    }

    #[test]
    fn cap_samples_exactly() {
        let schema = manual_policy_schema("m1").unwrap();
        let rule = AbacRule::new(OpPattern::Any, Decision::Deny);
        let limits = Enumeration { cap: 100, seed: 3 };
        let a = init_from_general_rules(std::slice::from_ref(&rule), &schema, limits).unwrap();
        let b = init_from_general_rules(&[rule], &schema, limits).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn user_defaults() {
        let schema = manual_policy_schema("m2").unwrap();
        let neighbor = UserDefault {
            filter: AttributeFilter::new().with("Role", "neighbor"),
            decision: Decision::Deny,
        };
        let mother = UserDefault {
            filter: AttributeFilter::new().with("Role", "mother"),
            decision: Decision::Permit,
        };
        let n = init_from_user_defaults(
            std::slice::from_ref(&neighbor),
            &schema,
            Enumeration::default(),
        )
        .unwrap();
        assert!(!n.is_empty() && n.iter().all(|e| e.decision == Decision::Deny));
        let m = init_from_user_defaults(
            std::slice::from_ref(&mother),
            &schema,
            Enumeration::default(),
        )
        .unwrap();
        assert!(n.iter().all(|e| !m.iter().any(|f| f.state == e.state)));

        let conflicting = UserDefault {
            decision: Decision::Permit,
            ..neighbor.clone()
        };
        assert!(matches!(
            init_from_user_defaults(&[neighbor, conflicting], &schema, Enumeration::default()),
            Err(Error::Conflict(_))
        ));
        let not_user = UserDefault {
            filter: AttributeFilter::new().with("Time", "night"),
            decision: Decision::Deny,
        };
        assert!(init_from_user_defaults(&[not_user], &schema, Enumeration::default()).is_err());
    }

    #[test]
    fn capability_defaults() {
        let schema = manual_policy_schema("m2").unwrap();
        let temp = schema.operation_index("set_temperature").unwrap();
        let music = schema.operation_index("play_music").unwrap();
        let mut map = BTreeMap::new();
        map.insert("set_temperature".to_string(), Decision::Permit);
        let ex = init_from_capability_defaults(&map, &schema, Enumeration::default()).unwrap();
        assert!(ex
            .iter()
            .all(|e| e.decision == Decision::Permit && e.state.op == temp));
        map.insert("play_music".to_string(), Decision::Deny);
        let ex = init_from_capability_defaults(&map, &schema, Enumeration::default()).unwrap();
        assert_eq!(ex.iter().filter(|e| e.state.op == temp).count(), 560);
        assert_eq!(ex.iter().filter(|e| e.state.op == music).count(), 560);
        assert_eq!(ex.len(), 1120);
        map.insert("fly".to_string(), Decision::Deny);
        assert!(init_from_capability_defaults(&map, &schema, Enumeration::default()).is_err());
    }

    #[test]
    fn log_examples_keep_duplicates() {
        let schema = manual_policy_schema("m1").unwrap();
        let mut log = AccessLog::new(Arc::clone(&schema));
        let s = State {
            values: vec![0, 0, 0, 0],
            op: 0,
        };
        for _ in 0..3 {
            log.push_state(s.clone(), Decision::Permit).unwrap();
        }
        log.push_state(
            State {
                values: vec![1, 0, 0, 0],
                op: 0,
            },
            Decision::Deny,
        )
        .unwrap();
        let ex = init_from_log(&log, &schema).unwrap();
        assert_eq!(ex.len(), 4);
        let merged = merge_examples(vec![ex]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].weight, 3.0);
        assert!(init_from_log(&AccessLog::new(Arc::clone(&schema)), &schema)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn merge_halves_conflicts() {
        let s = State {
            values: vec![0],
            op: 0,
        };
        let permit = WarmstartExample {
            state: s.clone(),
            decision: Decision::Permit,
            weight: 1.0,
        };
        let deny = WarmstartExample {
            state: s,
            decision: Decision::Deny,
            weight: 1.0,
        };
        let merged = merge_examples(vec![vec![permit.clone()], vec![deny], vec![permit]]);
        assert_eq!(merged.len(), 2);
        assert!(merged.iter().all(|e| e.weight == 0.5));
    }
}
