use serde::{Deserialize, Serialize};

use crate::abac::Decision;
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;

/// Bandit action; index order is fixed (permit = 0, deny = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Permit = 0,
    Deny = 1,
}

pub const NUM_ACTIONS: usize = 2;
pub const ACTIONS: [Action; NUM_ACTIONS] = [Action::Permit, Action::Deny];

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        ACTIONS[i]
    }

    pub fn other(self) -> Action {
        match self {
            Action::Permit => Action::Deny,
            Action::Deny => Action::Permit,
        }
    }
}

impl From<Decision> for Action {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Permit => Action::Permit,
            Decision::Deny => Action::Deny,
        }
    }
}

impl From<Action> for Decision {
    fn from(a: Action) -> Self {
        match a {
            Action::Permit => Decision::Permit,
            Action::Deny => Decision::Deny,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Index of the cheapest action; ties go to the lower index.
pub fn argmin(costs: &[f64; NUM_ACTIONS]) -> Action {
    if costs[1] < costs[0] {
        Action::Deny
    } else {
        Action::Permit
    }
}

/// Step size schedule `η_t = η / sqrt(1 + t / scale)`, `t` counting updates
/// already applied to the action's regressor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRate {
    pub eta: f64,
    pub decay_scale: f64,
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate {
            eta: 0.5,
            decay_scale: 1000.0,
        }
    }
}

impl LearningRate {
    pub fn at(&self, updates: u64) -> f64 {
        self.eta / (1.0 + updates as f64 / self.decay_scale).sqrt()
    }
}

/// One-against-all online logistic regression: one weight vector per action,
/// predicted cost `σ(w_a · x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSensitiveLearner {
    weights: [Vec<f64>; NUM_ACTIONS],
    updates: [u64; NUM_ACTIONS],
    rate: LearningRate,
}

impl CostSensitiveLearner {
    pub fn new(dim: usize, rate: LearningRate) -> Self {
        CostSensitiveLearner {
            weights: [vec![0.0; dim], vec![0.0; dim]],
            updates: [0; NUM_ACTIONS],
            rate,
        }
    }

    pub(crate) fn from_parts(
        weights: [Vec<f64>; NUM_ACTIONS],
        updates: [u64; NUM_ACTIONS],
        rate: LearningRate,
    ) -> Self {
        CostSensitiveLearner {
            weights,
            updates,
            rate,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn rate(&self) -> LearningRate {
        self.rate
    }

    pub fn weights(&self, action: Action) -> &[f64] {
        &self.weights[action.index()]
    }

    pub fn updates(&self, action: Action) -> u64 {
        self.updates[action.index()]
    }

    pub fn reset(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        self.updates = [0; NUM_ACTIONS];
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        match x.max_slot() {
            Some(slot) if slot >= self.dim() => Err(Error::SchemaMismatch(format!(
                "feature slot {slot} exceeds learner dimension {}",
                self.dim()
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn margin(&self, action: Action, x: &FeatureVector) -> f64 {
        let w = &self.weights[action.index()];
        x.iter().map(|(slot, v)| w[slot] * v).sum()
    }

    pub fn predict_costs(&self, x: &FeatureVector) -> Result<[f64; NUM_ACTIONS]> {
        self.check_dim(x)?;
        Ok([
            sigmoid(self.margin(Action::Permit, x)),
            sigmoid(self.margin(Action::Deny, x)),
        ])
    }

    pub fn greedy(&self, x: &FeatureVector) -> Result<Action> {
        Ok(argmin(&self.predict_costs(x)?))
    }

    fn check_inputs(target: f64, importance: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::NonFinite("target cost"));
        }
        if !importance.is_finite() {
            return Err(Error::NonFinite("importance"));
        }
        if importance < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "importance {importance} is negative"
            )));
        }
        Ok(target.clamp(0.0, 1.0))
    }

    #[inline]
    fn step(&mut self, x: &FeatureVector, action: Action, target: f64, scale: f64) {
        let g = sigmoid(self.margin(action, x)) - target;
        let w = &mut self.weights[action.index()];
        for (slot, v) in x.iter() {
            w[slot] -= scale * g * v;
        }
    }

    /// `w_a ← w_a − η_t · importance · (σ(w_a·x) − target) · x` on the named
    /// action only. The target is clamped to `[0, 1]`; zero importance is a no-op.
    pub fn cs_update(
        &mut self,
        x: &FeatureVector,
        action: Action,
        target: f64,
        importance: f64,
    ) -> Result<()> {
        let target = Self::check_inputs(target, importance)?;
        self.check_dim(x)?;
        if importance == 0.0 {
            return Ok(());
        }
        let eta = self.rate.at(self.updates[action.index()]);
        self.step(x, action, target, eta * importance);
        self.updates[action.index()] += 1;
        Ok(())
    }

    /// Importance-weighted update applied as `⌈importance⌉` sequential
    /// sub-steps of equal weight, each re-evaluating the gradient. Large IPS
    /// weights then move the prediction towards the target instead of
    /// overshooting past it. Counts as a single update for the step schedule.
    pub fn importance_update(
        &mut self,
        x: &FeatureVector,
        action: Action,
        target: f64,
        importance: f64,
    ) -> Result<()> {
        let target = Self::check_inputs(target, importance)?;
        self.check_dim(x)?;
        if importance == 0.0 {
            return Ok(());
        }
        let eta = self.rate.at(self.updates[action.index()]);
        let chunks = importance.ceil().max(1.0);
        let per_chunk = importance / chunks;
        for _ in 0..chunks as u64 {
            self.step(x, action, target, eta * per_chunk);
        }
        self.updates[action.index()] += 1;
        Ok(())
    }

    /// Full-information update: cost 0 for the true action, 1 for the other.
    pub fn supervised_update(
        &mut self,
        x: &FeatureVector,
        truth: Decision,
        weight: f64,
    ) -> Result<()> {
        let truth = Action::from(truth);
        self.cs_update(x, truth, 0.0, weight)?;
        self.cs_update(x, truth.other(), 1.0, weight)
    }
}
