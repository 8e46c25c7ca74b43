use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use proptest::prelude::*;

use abac_bandit::abac::{
    AccessLog, AttributeDef, AttributeKind, AttributeSchema, Decision, LogEntry,
};
use abac_bandit::featurizer::{State, StateEnumerator};
use abac_bandit::planning::{plan_augment, ValueHierarchy};

use Decision::{Deny, Permit};

#[derive(Debug)]
struct Case {
    schema: Arc<AttributeSchema>,
    hierarchy: ValueHierarchy,
    log: AccessLog,
}

// Edges only run from a lower value index to a higher one, so every draw is acyclic.
fn cases() -> impl Strategy<Value = Case> {
    (prop::collection::vec(2usize..6, 1..4), 1usize..3)
        .prop_flat_map(|(sizes, ops)| {
            let pairs: Vec<(usize, u32, u32)> = sizes
                .iter()
                .enumerate()
                .flat_map(|(a, &n)| {
                    (0..n as u32).flat_map(move |u| (u + 1..n as u32).map(move |l| (a, u, l)))
                })
                .collect();
            let n_pairs = pairs.len();
            let total: u64 = sizes.iter().map(|&n| n as u64).product::<u64>() * ops as u64;
            (
                Just((sizes, ops, pairs)),
                prop::collection::vec(any::<bool>(), n_pairs),
                prop::collection::vec((0..total, any::<bool>()), 1..40),
            )
        })
        .prop_map(|((sizes, ops, pairs), keep, draws)| {
            let kinds = [
                AttributeKind::User,
                AttributeKind::Object,
                AttributeKind::Environment,
            ];
            let attrs = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    AttributeDef::new(
                        format!("a{i}"),
                        kinds[i % 3],
                        (0..n).map(|j| format!("v{j}")),
                    )
                })
                .collect();
            let schema =
                Arc::new(AttributeSchema::new(attrs, (0..ops).map(|j| format!("op{j}"))).unwrap());
            let mut named: Vec<(String, Vec<(String, String)>)> = (0..sizes.len())
                .map(|i| (format!("a{i}"), Vec::new()))
                .collect();
            for (&(a, u, l), k) in pairs.iter().zip(keep) {
                if k {
                    named[a].1.push((format!("v{u}"), format!("v{l}")));
                }
            }
            let hierarchy = ValueHierarchy::new(
                Arc::clone(&schema),
                named.iter().map(|(a, p)| {
                    (
                        a.as_str(),
                        p.iter().map(|(u, l)| (u.as_str(), l.as_str())).collect(),
                    )
                }),
            )
            .unwrap();
            let en = StateEnumerator::all(&schema);
            let entries = draws
                .into_iter()
                .map(|(i, p)| LogEntry {
                    state: en.nth(i as u128),
                    decision: if p { Permit } else { Deny },
                })
                .collect();
            let log = AccessLog::from_entries(Arc::clone(&schema), entries).unwrap();
            Case {
                schema,
                hierarchy,
                log,
            }
        })
}

/// `Some(true)` when `to` is `from` moved one edge up, `Some(false)` one edge down.
fn one_step(h: &ValueHierarchy, from: &State, to: &State) -> Option<bool> {
    if from.op != to.op {
        return None;
    }
    let diff: Vec<usize> = (0..from.values.len())
        .filter(|&i| from.values[i] != to.values[i])
        .collect();
    let [attr] = diff[..] else { return None };
    let (f, t) = (from.values[attr], to.values[attr]);
    if h.edges(attr).contains(&(t, f)) {
        Some(true)
    } else if h.edges(attr).contains(&(f, t)) {
        Some(false)
    } else {
        None
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn originals_kept_in_place(case in cases()) {
        let out = plan_augment(&case.log, &case.hierarchy).unwrap();
        prop_assert!(out.len() >= case.log.len());
        prop_assert_eq!(&out.entries()[..case.log.len()], case.log.entries());
    }

    #[test]
    fn additions_are_sound_first_level_and_unique(case in cases()) {
        let out = plan_augment(&case.log, &case.hierarchy).unwrap();
        let originals: HashMap<&State, Vec<Decision>> =
            case.log.entries().iter().fold(HashMap::new(), |mut m, e| {
                m.entry(&e.state).or_default().push(e.decision);
                m
            });
        let mut added = HashSet::new();
        for e in &out.entries()[case.log.len()..] {
            prop_assert!(added.insert(e.state.clone()), "duplicate added state");
            prop_assert!(!originals.contains_key(&e.state), "added label on a logged state");
            // some original with the same decision sits one edge away in the right direction
            let justified = case.log.entries().iter().any(|o| {
                o.decision == e.decision
                    && match (e.decision, one_step(&case.hierarchy, &o.state, &e.state)) {
                        (Permit, Some(up)) => up,
                        (Deny, Some(up)) => !up,
                        _ => false,
                    }
            });
            prop_assert!(justified, "unjustified label {:?}", e);
        }
    }

    #[test]
    fn consistent_truth_is_never_contradicted(case in cases(), threshold in 0u32..6) {
        // Ground truth: permit iff the first attribute's value index is at most
        // `threshold`. Edges go from low to high indices, so permits are closed
        // upward and denies downward.
        let truth = |s: &State| if s.values[0] <= threshold { Permit } else { Deny };
        let entries = case
            .log
            .entries()
            .iter()
            .map(|e| LogEntry { state: e.state.clone(), decision: truth(&e.state) })
            .collect();
        let log = AccessLog::from_entries(Arc::clone(&case.schema), entries).unwrap();
        let out = plan_augment(&log, &case.hierarchy).unwrap();
        for e in out.entries() {
            prop_assert_eq!(e.decision, truth(&e.state));
        }
    }

    #[test]
    fn augmenting_twice_only_grows_from_new_entries(case in cases()) {
        let once = plan_augment(&case.log, &case.hierarchy).unwrap();
        let twice = plan_augment(&once, &case.hierarchy).unwrap();
        prop_assert_eq!(&twice.entries()[..once.len()], once.entries());
    }
}

#[test]
fn empty_hierarchy_adds_nothing() {
    let schema = Arc::new(
        AttributeSchema::new(
            vec![AttributeDef::new("a", AttributeKind::User, ["x", "y"])],
            ["r"],
        )
        .unwrap(),
    );
    let en = StateEnumerator::all(&schema);
    let log = AccessLog::from_entries(
        Arc::clone(&schema),
        en.iter()
            .map(|state| LogEntry {
                state,
                decision: Permit,
            })
            .collect(),
    )
    .unwrap();
    let out = plan_augment(&log, &ValueHierarchy::empty(schema)).unwrap();
    assert_eq!(out, log);
}
