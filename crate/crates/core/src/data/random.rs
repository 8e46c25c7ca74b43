use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abac::{
    AbacPolicy, AbacRule, AttributeDef, AttributeKind, AttributeSchema, CompiledPolicy, Decision,
    OpPattern,
};
use crate::error::{Error, Result};
use crate::featurizer::StateEnumerator;

/// Shape of a synthetic policy. `attributes` counts the operation as one
/// attribute and `values` counts the operations among the values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomPolicyConfig {
    pub rules: usize,
    pub attributes: usize,
    pub values: usize,
    pub target_log_size: u64,
    #[serde(default = "default_permit_probability")]
    pub permit_probability: f64,
    /// Largest number of constraints (operation included) in one rule.
    #[serde(default = "default_max_rule_width")]
    pub max_rule_width: usize,
    pub seed: u64,
}

fn default_permit_probability() -> f64 {
    0.8
}

fn default_max_rule_width() -> usize {
    3
}

const SIZE_TOLERANCE: f64 = 0.15;
const PARTITION_RETRIES: usize = 200_000;
const POLICY_RETRIES: usize = 1_000;
const MIN_CLASS_FRACTION: f64 = 0.1;

impl RandomPolicyConfig {
    pub fn new(
        rules: usize,
        attributes: usize,
        values: usize,
        target_log_size: u64,
        seed: u64,
    ) -> Self {
        RandomPolicyConfig {
            rules,
            attributes,
            values,
            target_log_size,
            permit_probability: default_permit_probability(),
            max_rule_width: default_max_rule_width(),
            seed,
        }
    }

    /// The three synthetic profiles `s1`, `s2`, `s3`.
    pub fn preset(id: &str, seed: u64) -> Result<Self> {
        Ok(match id {
            "s1" => Self::new(5, 8, 30, 21_000, seed),
            "s2" => Self::new(10, 10, 34, 70_000, seed),
            "s3" => Self::new(15, 12, 37, 200_000, seed),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown synthetic preset '{other}'"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 attributes (operation included)".into(),
            ));
        }
        if self.values < 2 * self.attributes {
            return Err(Error::InvalidConfig(format!(
                "{} values cannot give {} attributes two values each",
                self.values, self.attributes
            )));
        }
        if self.rules == 0 {
            return Err(Error::InvalidConfig("need at least one rule".into()));
        }
        if self.max_rule_width == 0 {
            return Err(Error::InvalidConfig(
                "max_rule_width must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.permit_probability) {
            return Err(Error::InvalidConfig(
                "permit_probability outside [0, 1]".into(),
            ));
        }
        if self.target_log_size == 0 {
            return Err(Error::InvalidConfig(
                "target log size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Splits `total` into `parts` sizes ≥ 2 whose product is within ±15% of `target`.
pub fn partition_sizes(
    total: usize,
    parts: usize,
    target: u64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let lo = target as f64 * (1.0 - SIZE_TOLERANCE);
    let hi = target as f64 * (1.0 + SIZE_TOLERANCE);
    if parts == 0 || total < 2 * parts {
        return Err(Error::Infeasible(format!(
            "{total} values cannot fill {parts} ranges of size ≥ 2"
        )));
    }
    for _ in 0..PARTITION_RETRIES {
        let mut sizes = vec![2usize; parts];
        for _ in 0..total - 2 * parts {
            sizes[rng.random_range(0..parts)] += 1;
        }
        let product: f64 = sizes.iter().map(|&s| s as f64).product();
        if (lo..=hi).contains(&product) {
            return Ok(sizes);
        }
    }
    Err(Error::Infeasible(format!(
        "no split of {total} values into {parts} ranges reaches {target} ± 15% tuples"
    )))
}

fn kind_for(i: usize) -> AttributeKind {
    [
        AttributeKind::User,
        AttributeKind::Object,
        AttributeKind::Environment,
    ][i % 3]
}

fn random_schema(cfg: &RandomPolicyConfig, rng: &mut impl Rng) -> Result<Arc<AttributeSchema>> {
    let sizes = partition_sizes(cfg.values, cfg.attributes, cfg.target_log_size, rng)?;
    let (attr_sizes, op_size) = sizes.split_at(sizes.len() - 1);
    let attributes = attr_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            AttributeDef::new(
                format!("a{i}"),
                kind_for(i),
                (0..n).map(|j| format!("a{i}_v{j}")),
            )
        })
        .collect();
    let ops = (0..op_size[0]).map(|j| format!("op{j}"));
    Ok(Arc::new(AttributeSchema::new(attributes, ops)?))
}

fn random_rule(schema: &AttributeSchema, cfg: &RandomPolicyConfig, rng: &mut impl Rng) -> AbacRule {
    let slots = schema.num_attributes() + 1;
    let width = rng.random_range(1..=cfg.max_rule_width.min(slots));
    let chosen = rand::seq::index::sample(rng, slots, width);
    let decision = if rng.random_bool(cfg.permit_probability) {
        Decision::Permit
    } else {
        Decision::Deny
    };
    let mut rule = AbacRule::new(OpPattern::Any, decision);
    let mut picked: Vec<usize> = chosen.into_iter().collect();
    picked.sort_unstable();
    for slot in picked {
        if slot == schema.num_attributes() {
            let op = schema.operations().choose(rng).expect("non-empty");
            rule.op = OpPattern::named(op.clone());
            continue;
        }
        let def = &schema.attributes()[slot];
        let value = def.values.choose(rng).expect("non-empty");
        rule = match def.kind {
            AttributeKind::User => rule.user(&def.name, value),
            AttributeKind::Object => rule.object(&def.name, value),
            AttributeKind::Environment => rule.env(&def.name, value),
        };
    }
    rule
}

/// Fraction of permits over the full enumeration.
fn permit_fraction(policy: &AbacPolicy) -> Result<f64> {
    let compiled = CompiledPolicy::new(policy)?;
    let en = StateEnumerator::all(compiled.schema());
    let permits = en
        .iter()
        .filter(|s| compiled.decide_state(s) == Decision::Permit)
        .count();
    Ok(permits as f64 / en.count() as f64)
}

/// A random policy with the configured shape, regenerated until both
/// decisions cover at least 10% of the enumerated log.
pub fn gen_random_policy(cfg: &RandomPolicyConfig) -> Result<AbacPolicy> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schema = random_schema(cfg, &mut rng)?;
    for _ in 0..POLICY_RETRIES {
        let rules = (0..cfg.rules)
            .map(|_| random_rule(&schema, cfg, &mut rng))
            .collect();
        let policy = AbacPolicy::new(Arc::clone(&schema), rules);
        let frac = permit_fraction(&policy)?;
        if (MIN_CLASS_FRACTION..=1.0 - MIN_CLASS_FRACTION).contains(&frac) {
            return Ok(policy);
        }
    }
    Err(Error::Infeasible(format!(
        "no policy with both decisions above {MIN_CLASS_FRACTION} after {POLICY_RETRIES} draws"
    )))
}
