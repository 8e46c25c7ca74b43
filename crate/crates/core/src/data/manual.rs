//! The three hand-written home-IoT policies.
//!
//! Schemas carry the original attribute ranges. The original rule sets are not
//! available, so the rules below are reconstructions with the original rule
//! counts (11, 11, 38). The m3 schema also gains a 10-value `Role` attribute,
//! which brings it to 44 values and 48,000 tuples.
//! Its rules grant each role the operations at or below its privilege level,
//! then deny a few risky operation and time combinations, which keeps the
//! policy consistent with its value hierarchy.

use std::sync::Arc;

use crate::abac::{
    AbacPolicy, AbacRule, AttributeDef, AttributeKind, AttributeSchema, Decision, OpPattern,
};
use crate::error::{Error, Result};
use crate::planning::ValueHierarchy;

use AttributeKind::{Environment, Object, User};
use Decision::{Deny, Permit};

const USERNAMES: [&str; 7] = ["M", "F", "D", "S", "B", "N", "BS"];

/// Attribute schema of a manual policy; `id` is one of `m1`, `m2`, `m3`.
pub fn manual_policy_schema(id: &str) -> Result<Arc<AttributeSchema>> {
    let (attributes, ops): (Vec<AttributeDef>, Vec<&str>) = match id {
        "m1" => (
            vec![
                AttributeDef::new(
                    "Role",
                    User,
                    ["mother", "father", "child", "visiting_family", "guest"],
                ),
                AttributeDef::new("Time", Environment, ["day", "midday", "night", "midnight"]),
                AttributeDef::new(
                    "Location",
                    Object,
                    ["inside_home", "outside_home", "yard", "basement"],
                ),
                AttributeDef::new("Username", User, USERNAMES),
            ],
            vec![
                "lights_on_off",
                "order_online",
                "set_temperature",
                "turn_on_cooler",
                "turn_on_heater",
                "install_software_update",
                "mower_on_off",
                "connect_new_device",
                "view_lock_state",
                "play_music",
            ],
        ),
        "m2" => (
            vec![
                AttributeDef::new(
                    "Role",
                    User,
                    ["mother", "father", "child", "baby_sitter", "neighbor"],
                ),
                AttributeDef::new(
                    "Time",
                    Environment,
                    ["morning", "afternoon", "evening", "night"],
                ),
                AttributeDef::new(
                    "Location",
                    Object,
                    ["kitchen", "living_room", "bedroom1", "bedroom2"],
                ),
                AttributeDef::new("Username", User, USERNAMES),
            ],
            vec![
                "lights_on_off",
                "order_online",
                "set_temperature",
                "play_music",
                "turn_on_cooler",
                "turn_on_heater",
                "camera_on_off",
                "view_temperature_log",
                "answer_door",
            ],
        ),
        "m3" => (
            vec![
                AttributeDef::new(
                    "Role",
                    User,
                    [
                        "mother",
                        "father",
                        "child",
                        "baby_sitter",
                        "neighbor",
                        "guest",
                        "grandparent",
                        "teenager",
                        "toddler",
                        "plumber",
                    ],
                ),
                AttributeDef::new(
                    "Time",
                    Environment,
                    [
                        "day",
                        "morning",
                        "afternoon",
                        "evening",
                        "night",
                        "midnight",
                    ],
                ),
                AttributeDef::new(
                    "Location",
                    Object,
                    [
                        "kitchen",
                        "living_room",
                        "bedroom1",
                        "bedroom2",
                        "inside_home",
                        "outside_home",
                        "yard",
                        "basement",
                    ],
                ),
                AttributeDef::new(
                    "Username",
                    User,
                    ["M", "F", "D", "S", "B", "N", "BS", "G", "T", "P"],
                ),
            ],
            vec![
                "lights_on_off",
                "order_online",
                "set_temperature",
                "play_music",
                "turn_on_cooler",
                "turn_on_heater",
                "camera_on_off",
                "view_temperature_log",
                "answer_door",
                "mower_on_off",
            ],
        ),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown manual policy '{other}'"
            )))
        }
    };
    Ok(Arc::new(AttributeSchema::new(attributes, ops)?))
}

fn op(name: &str) -> OpPattern {
    OpPattern::named(name)
}

fn role(r: &str, op: OpPattern, d: Decision) -> AbacRule {
    AbacRule::new(op, d).user("Role", r)
}

/// Ground-truth manual policy (deny-overrides, default deny).
pub fn manual_policy(id: &str) -> Result<AbacPolicy> {
    let schema = manual_policy_schema(id)?;
    let any = OpPattern::Any;
    let rules = match id {
        "m1" => vec![
            role("mother", any.clone(), Permit),
            role("father", any.clone(), Permit),
            role("child", op("lights_on_off"), Permit),
            role("child", op("play_music"), Permit),
            role("child", op("play_music"), Deny).env("Time", "midnight"),
            role("child", op("order_online"), Deny),
            role("visiting_family", op("lights_on_off"), Permit).object("Location", "inside_home"),
            role("visiting_family", op("view_lock_state"), Permit),
            role("guest", op("lights_on_off"), Permit).object("Location", "inside_home"),
            AbacRule::new(op("install_software_update"), Deny).env("Time", "midnight"),
            AbacRule::new(op("mower_on_off"), Permit)
                .object("Location", "yard")
                .env("Time", "day"),
        ],
        "m2" => vec![
            role("mother", any.clone(), Permit),
            role("father", any.clone(), Permit),
            role("mother", op("order_online"), Deny).env("Time", "night"),
            role("child", op("lights_on_off"), Permit),
            role("child", op("play_music"), Permit).object("Location", "bedroom1"),
            role("child", op("play_music"), Permit).object("Location", "bedroom2"),
            role("child", any.clone(), Deny).env("Time", "night"),
            role("baby_sitter", op("lights_on_off"), Permit),
            role("baby_sitter", op("answer_door"), Permit),
            role("baby_sitter", op("set_temperature"), Permit).env("Time", "evening"),
            role("neighbor", op("answer_door"), Deny),
        ],
        "m3" => m3_rules(),
        _ => unreachable!("schema lookup rejected the id"),
    };
    Ok(AbacPolicy::new(schema, rules))
}

// Privilege levels: a role may use every operation whose requirement it meets.
const M3_ROLE_LEVELS: [(&str, u8); 10] = [
    ("mother", 5),
    ("father", 5),
    ("grandparent", 4),
    ("teenager", 4),
    ("baby_sitter", 3),
    ("child", 3),
    ("guest", 2),
    ("toddler", 1),
    ("neighbor", 1),
    ("plumber", 1),
];

const M3_OP_REQUIREMENTS: [(&str, u8); 10] = [
    ("play_music", 1),
    ("lights_on_off", 2),
    ("answer_door", 3),
    ("view_temperature_log", 3),
    ("set_temperature", 4),
    ("turn_on_cooler", 4),
    ("turn_on_heater", 4),
    ("mower_on_off", 4),
    ("camera_on_off", 5),
    ("order_online", 5),
];

fn m3_rules() -> Vec<AbacRule> {
    let mut rules = Vec::new();
    // permits; levels are monotone along the Role hierarchy, so permits are closed upward
    for (r, level) in M3_ROLE_LEVELS {
        if level == 5 {
            rules.push(role(r, OpPattern::Any, Permit));
            continue;
        }
        for (o, required) in M3_OP_REQUIREMENTS {
            if level >= required {
                rules.push(role(r, op(o), Permit));
            }
        }
    }
    // denies, closed downward along Role and Time
    rules.extend([
        AbacRule::new(op("order_online"), Deny).env("Time", "night"),
        AbacRule::new(op("order_online"), Deny).env("Time", "midnight"),
        AbacRule::new(op("mower_on_off"), Deny).env("Time", "night"),
        AbacRule::new(op("mower_on_off"), Deny).env("Time", "midnight"),
        AbacRule::new(op("answer_door"), Deny).env("Time", "midnight"),
        AbacRule::new(op("play_music"), Deny)
            .object("Location", "bedroom2")
            .env("Time", "midnight"),
        role("toddler", OpPattern::Any, Deny).object("Location", "basement"),
    ]);
    rules
}

/// Role and Time hierarchies for m3; the m3 rules are consistent with them.
pub fn manual_hierarchy(id: &str) -> Result<Option<ValueHierarchy>> {
    if id != "m3" {
        manual_policy_schema(id)?;
        return Ok(None);
    }
    let schema = manual_policy_schema(id)?;
    let h = ValueHierarchy::new(
        schema,
        [
            (
                "Role",
                vec![
                    ("mother", "teenager"),
                    ("father", "teenager"),
                    ("teenager", "child"),
                    ("grandparent", "child"),
                    ("child", "toddler"),
                    ("baby_sitter", "guest"),
                ],
            ),
            (
                "Time",
                vec![
                    ("day", "morning"),
                    ("day", "afternoon"),
                    ("night", "midnight"),
                ],
            ),
        ],
    )?;
    Ok(Some(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abac::{validate_policy, CompiledPolicy};
    use crate::featurizer::StateEnumerator;
    use crate::planning::{get_lower_neighbors, get_upper_neighbors};

    #[test]
    fn sizes() {
        for (id, values, rules, tuples) in [
            ("m1", 30, 11, 5600),
            ("m2", 29, 11, 5040),
            ("m3", 44, 38, 48_000),
        ] {
            let schema = manual_policy_schema(id).unwrap();
            assert_eq!(schema.total_values(), values, "{id}");
            assert_eq!(schema.num_attributes() + 1, 5, "{id}");
            assert_eq!(schema.enumeration_size(), tuples, "{id}");
            let p = manual_policy(id).unwrap();
            assert_eq!(p.rules.len(), rules, "{id}");
            assert!(validate_policy(&p).is_empty(), "{id}");
        }
        assert!(manual_policy_schema("m4").is_err());
    }

    #[test]
    fn both_classes_present() {
        for id in ["m1", "m2", "m3"] {
            let p = CompiledPolicy::new(&manual_policy(id).unwrap()).unwrap();
            let en = StateEnumerator::all(p.schema());
            let permits = en.iter().filter(|s| p.decide_state(s) == Permit).count() as f64;
            let frac = permits / en.count() as f64;
            assert!((0.1..0.9).contains(&frac), "{id}: {frac}");
        }
    }

    #[test]
    fn m3_is_hierarchy_consistent() {
        let p = CompiledPolicy::new(&manual_policy("m3").unwrap()).unwrap();
        let h = manual_hierarchy("m3").unwrap().unwrap();
        for s in StateEnumerator::all(p.schema()).iter() {
            match p.decide_state(&s) {
                Permit => {
                    for u in get_upper_neighbors(&s, &h) {
                        assert_eq!(p.decide_state(&u), Permit, "{:?} -> {:?}", s, u);
                    }
                }
                Deny => {
                    for l in get_lower_neighbors(&s, &h) {
                        assert_eq!(p.decide_state(&l), Deny, "{:?} -> {:?}", s, l);
                    }
                }
            }
        }
    }
}
