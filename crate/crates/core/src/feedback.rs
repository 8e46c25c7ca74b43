//! Owner feedback simulation and the reward/cost signal.
//!
//! Reward for one round sums, over the owners of the requested object,
//! `λ_TP·TP + λ_TN·TN − λ_FP·FP − λ_FN·FN`, where exactly one indicator fires
//! per owner. The learner consumes the reward rescaled to a cost in `[0, 1]`.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abac::{AttributeFilter, AttributeSchema, CompiledPolicy, Decision};
use crate::error::{Error, Result};
use crate::featurizer::State;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub tp: f64,
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            tp: 1.0,
            tn: 1.0,
            fp: 1.0,
            fn_: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tp", self.tp),
            ("tn", self.tn),
            ("fp", self.fp),
            ("fn", self.fn_),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "reward weight {name} = {v} must be >= 0"
                )));
            }
        }
        Ok(())
    }

    /// `(R_min, R_max)` for `owners` owners.
    pub fn bounds(&self, owners: usize) -> (f64, f64) {
        let n = owners as f64;
        (-n * self.fp.max(self.fn_), n * self.tp.max(self.tn))
    }
}

/// The four confusion indicators for one owner; exactly one is 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RewardItems {
    pub tp: u8,
    pub tn: u8,
    pub fp: u8,
    pub fn_: u8,
}

pub fn reward_items(owner: Decision, engine: Decision) -> RewardItems {
    let mut items = RewardItems::default();
    match (owner, engine) {
        (Decision::Permit, Decision::Permit) => items.tp = 1,
        (Decision::Deny, Decision::Deny) => items.tn = 1,
        (Decision::Deny, Decision::Permit) => items.fp = 1,
        (Decision::Permit, Decision::Deny) => items.fn_ = 1,
    }
    items
}

pub fn reward(owners: &[Decision], engine: Decision, weights: &RewardWeights) -> Result<f64> {
    if owners.is_empty() {
        return Err(Error::Empty("owner decisions"));
    }
    Ok(owners
        .iter()
        .map(|&d| {
            let i = reward_items(d, engine);
            weights.tp * i.tp as f64 + weights.tn * i.tn as f64
                - weights.fp * i.fp as f64
                - weights.fn_ * i.fn_ as f64
        })
        .sum())
}

/// Affine map of a reward onto `[0, 1]`: `R_max ↦ 0`, `R_min ↦ 1`.
pub fn reward_to_cost(r: f64, weights: &RewardWeights, owners: usize) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    let (lo, hi) = weights.bounds(owners);
    if hi - lo <= 0.0 {
        return Err(Error::InvalidConfig("all reward weights are zero".into()));
    }
    let tol = 1e-9 * (hi - lo);
    if r < lo - tol || r > hi + tol {
        return Err(Error::OutOfRange {
            value: r,
            min: lo,
            max: hi,
        });
    }
    Ok(((hi - r) / (hi - lo)).clamp(0.0, 1.0))
}

/// Where an owner's true decision comes from.
#[derive(Clone, Debug)]
pub enum OwnerTruth {
    /// Ground-truth policy evaluated on the request.
    Policy(CompiledPolicy),
    /// The decision recorded in the replayed log.
    Replay,
}

#[derive(Clone, Debug)]
pub struct Owner {
    pub name: String,
    /// Object-attribute filter selecting the objects this owner governs.
    pub scope: AttributeFilter,
    pub truth: OwnerTruth,
    scope_index: Vec<(usize, u32)>,
}

/// Owners and the objects they govern.
#[derive(Clone, Debug)]
pub struct OwnerModel {
    owners: Vec<Owner>,
}

impl OwnerModel {
    /// A single owner of every object whose decisions are the replayed log's.
    pub fn single_replay() -> Self {
        OwnerModel {
            owners: vec![Owner {
                name: "owner".into(),
                scope: AttributeFilter::new(),
                truth: OwnerTruth::Replay,
                scope_index: Vec::new(),
            }],
        }
    }

    pub fn new(
        schema: &AttributeSchema,
        owners: Vec<(String, AttributeFilter, OwnerTruth)>,
    ) -> Result<Self> {
        if owners.is_empty() {
            return Err(Error::Empty("owners"));
        }
        let owners = owners
            .into_iter()
            .map(|(name, scope, truth)| {
                let scope_index = scope
                    .iter()
                    .map(|(attr, value)| {
                        let i = schema
                            .attribute_index(attr)
                            .filter(|&i| {
                                schema.attributes()[i].kind == crate::abac::AttributeKind::Object
                            })
                            .ok_or_else(|| {
                                Error::SchemaMismatch(format!(
                                    "owner scope uses non-object attribute '{attr}'"
                                ))
                            })?;
                        let v = schema.value_index(i, value).ok_or_else(|| {
                            Error::SchemaMismatch(format!(
                                "owner scope value '{value}' not in V({attr})"
                            ))
                        })?;
                        Ok((i, v))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Owner {
                    name,
                    scope,
                    truth,
                    scope_index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OwnerModel { owners })
    }

    pub fn owners(&self) -> &[Owner] {
        &self.owners
    }

    /// `owner(o)`: owners whose scope matches the requested object.
    pub fn owners_of<'a>(&'a self, state: &'a State) -> impl Iterator<Item = &'a Owner> + 'a {
        self.owners.iter().filter(move |o| {
            o.scope_index
                .iter()
                .all(|&(attr, v)| state.values.get(attr) == Some(&v))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackRecord {
    pub engine: Decision,
    /// What each owner actually wants.
    pub truth: Vec<Decision>,
    /// What each owner reported; silence is recorded as agreement.
    pub reported: Vec<Decision>,
    pub reward: f64,
    pub cost: f64,
}

impl FeedbackRecord {
    /// The decision the feedback points to: the engine's own decision when it
    /// cost at most half, the opposite otherwise.
    pub fn revealed_decision(&self) -> Decision {
        if self.cost <= 0.5 {
            self.engine
        } else {
            self.engine.opposite()
        }
    }
}

/// Computes each owner's true decision, lets disagreeing owners stay silent
/// with probability `1 − rate`, and derives reward and cost.
pub fn simulate_feedback<R: Rng>(
    model: &OwnerModel,
    state: &State,
    logged: Decision,
    engine: Decision,
    rate: f64,
    weights: &RewardWeights,
    rng: &mut R,
) -> Result<FeedbackRecord> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!(
            "feedback rate {rate} outside [0, 1]"
        )));
    }
    let truth: Vec<Decision> = model
        .owners_of(state)
        .map(|o| match &o.truth {
            OwnerTruth::Policy(p) => p.decide_state(state),
            OwnerTruth::Replay => logged,
        })
        .collect();
    if truth.is_empty() {
        return Err(Error::NoOwner);
    }
    let reported: Vec<Decision> = truth
        .iter()
        .map(|&d| {
            if d != engine && rate < 1.0 && !rng.random_bool(rate) {
                engine
            } else {
                d
            }
        })
        .collect();
    let r = reward(&reported, engine, weights)?;
    let cost = reward_to_cost(r, weights, reported.len())?;
    Ok(FeedbackRecord {
        engine,
        truth,
        reported,
        reward: r,
        cost,
    })
}

/// Writes `t,d_ae,d_w,reward,cost` rows, owners' reports joined by `;`.
pub fn write_feedback_trace<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = (usize, &'a FeedbackRecord)>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "t,d_ae,d_w,reward,cost").map_err(io)?;
    for (t, rec) in records {
        let owners: Vec<&str> = rec.reported.iter().map(|d| d.as_str()).collect();
        writeln!(
            out,
            "{t},{},{},{},{}",
            rec.engine,
            owners.join(";"),
            rec.reward,
            rec.cost
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
