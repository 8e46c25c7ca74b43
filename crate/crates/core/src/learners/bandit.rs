use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::base::{argmin, Action, CostSensitiveLearner, LearningRate, NUM_ACTIONS};
use crate::abac::Decision;
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;

/// Default probability floor for bagging and online cover.
pub const DEFAULT_P_MIN: f64 = 0.0125;
pub const DEFAULT_PSI: f64 = 0.01;

/// Exploration strategy wrapped around the cost-sensitive base learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum Exploration {
    EpsilonGreedy { epsilon: f64 },
    ExploreFirst { k: u64 },
    Bagging { bags: usize },
    OnlineCover { policies: usize, psi: f64 },
}

impl Exploration {
    pub fn name(&self) -> &'static str {
        match self {
            Exploration::EpsilonGreedy { .. } => "epsilon",
            Exploration::ExploreFirst { .. } => "first",
            Exploration::Bagging { .. } => "bag",
            Exploration::OnlineCover { .. } => "cover",
        }
    }

    pub fn hyperparameter(&self) -> String {
        match *self {
            Exploration::EpsilonGreedy { epsilon } => format!("epsilon={epsilon}"),
            Exploration::ExploreFirst { k } => format!("{k} first"),
            Exploration::Bagging { bags } => format!("{bags} bags"),
            Exploration::OnlineCover { policies, psi } => format!("cover n={policies} psi={psi}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub exploration: Exploration,
    pub seed: u64,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default)]
    pub rate: LearningRate,
}

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}

impl BanditConfig {
    pub fn new(exploration: Exploration, seed: u64) -> Self {
        BanditConfig {
            exploration,
            seed,
            p_min: DEFAULT_P_MIN,
            rate: LearningRate::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self.exploration {
            Exploration::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(&epsilon) => {
                return bad(format!("epsilon {epsilon} outside [0, 1]"))
            }
            Exploration::Bagging { bags } if bags < 1 => {
                return bad("bagging needs at least one bag".into())
            }
            Exploration::OnlineCover { policies, .. } if policies < 1 => {
                return bad("online cover needs at least one policy".into())
            }
            Exploration::OnlineCover { psi, .. } if !(psi > 0.0 && psi.is_finite()) => {
                return bad(format!("psi {psi} must be positive"))
            }
            _ => {}
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0 / NUM_ACTIONS as f64) {
            return bad(format!("p_min {} outside (0, 1/|A|]", self.p_min));
        }
        if !(self.rate.eta > 0.0 && self.rate.eta.is_finite() && self.rate.decay_scale > 0.0) {
            return bad("learning rate must be positive".into());
        }
        Ok(())
    }

    /// Smallest probability the configured explorer can assign to a sampled
    /// action; `bandit_update` rejects anything below it.
    pub fn probability_floor(&self) -> f64 {
        match self.exploration {
            Exploration::EpsilonGreedy { epsilon } if epsilon > 0.0 => epsilon / NUM_ACTIONS as f64,
            Exploration::EpsilonGreedy { .. } => 1.0,
            Exploration::ExploreFirst { k } if k > 0 => 1.0 / NUM_ACTIONS as f64,
            Exploration::ExploreFirst { .. } => 1.0,
            Exploration::Bagging { .. } | Exploration::OnlineCover { .. } => self.p_min,
        }
    }

    fn num_learners(&self) -> usize {
        match self.exploration {
            Exploration::EpsilonGreedy { .. } | Exploration::ExploreFirst { .. } => 1,
            Exploration::Bagging { bags } => bags,
            Exploration::OnlineCover { policies, .. } => policies,
        }
    }
}

/// Probability per action, indexed by [`Action::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionDistribution(pub [f64; NUM_ACTIONS]);

impl ActionDistribution {
    pub fn prob(&self, action: Action) -> f64 {
        self.0[action.index()]
    }

    /// One-hot on `action`.
    pub fn point(action: Action) -> Self {
        let mut p = [0.0; NUM_ACTIONS];
        p[action.index()] = 1.0;
        ActionDistribution(p)
    }

    /// Vote frequencies mixed with the uniform floor: `p_min + (1 − K·p_min)·freq`.
    pub fn smoothed(votes: &[usize; NUM_ACTIONS], p_min: f64) -> Self {
        let total: usize = votes.iter().sum();
        let mass = 1.0 - NUM_ACTIONS as f64 * p_min;
        let mut p = [0.0; NUM_ACTIONS];
        for (pi, &v) in p.iter_mut().zip(votes) {
            *pi = p_min + mass * v as f64 / total as f64;
        }
        ActionDistribution(p)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Action {
        let u: f64 = rng.random();
        if u < self.0[0] {
            Action::Permit
        } else {
            Action::Deny
        }
    }
}

/// Inverse-propensity cost estimate: `cost / prob` on the chosen action, `0` elsewhere.
pub fn ips_estimate(chosen: Action, cost: f64, prob: f64) -> [f64; NUM_ACTIONS] {
    let mut c = [0.0; NUM_ACTIONS];
    c[chosen.index()] = cost / prob;
    c
}

/// A contextual-bandit authorization engine: one or more cost-sensitive
/// learners plus an exploration strategy and its own seeded RNG.
#[derive(Clone, Debug)]
pub struct Bandit {
    config: BanditConfig,
    learners: Vec<CostSensitiveLearner>,
    rng: ChaCha8Rng,
    poisson: Poisson<f64>,
}

impl Bandit {
    pub fn new(config: BanditConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let learners = (0..config.num_learners())
            .map(|_| CostSensitiveLearner::new(dim, config.rate))
            .collect();
        Ok(Bandit {
            config,
            learners,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            poisson: Poisson::new(1.0).expect("valid rate"),
        })
    }

    pub(crate) fn from_learners(
        config: BanditConfig,
        learners: Vec<CostSensitiveLearner>,
    ) -> Result<Self> {
        config.validate()?;
        if learners.len() != config.num_learners() {
            return Err(Error::InvalidConfig(format!(
                "expected {} learners, found {}",
                config.num_learners(),
                learners.len()
            )));
        }
        Ok(Bandit {
            config,
            learners,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            poisson: Poisson::new(1.0).expect("valid rate"),
        })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    pub fn learners(&self) -> &[CostSensitiveLearner] {
        &self.learners
    }

    pub fn dim(&self) -> usize {
        self.learners[0].dim()
    }

    /// Zeroed weights and a reseeded RNG.
    pub fn clone_reset(&self) -> Bandit {
        Bandit::new(self.config, self.dim()).expect("config already validated")
    }

    /// Costs predicted by the first learner (the greedy policy).
    pub fn predict_costs(&self, x: &FeatureVector) -> Result<[f64; NUM_ACTIONS]> {
        self.learners[0].predict_costs(x)
    }

    pub fn greedy(&self, x: &FeatureVector) -> Result<Action> {
        self.learners[0].greedy(x)
    }

    fn cover_distribution(&self, x: &FeatureVector, first: usize) -> Result<ActionDistribution> {
        let mut votes = [0usize; NUM_ACTIONS];
        for learner in &self.learners[..first] {
            votes[learner.greedy(x)?.index()] += 1;
        }
        Ok(ActionDistribution::smoothed(&votes, self.config.p_min))
    }

    /// Sampling distribution at round `t` (1-based).
    pub fn distribution(&self, x: &FeatureVector, t: u64) -> Result<ActionDistribution> {
        match self.config.exploration {
            Exploration::EpsilonGreedy { epsilon } => {
                let greedy = self.greedy(x)?;
                let mut p = [epsilon / NUM_ACTIONS as f64; NUM_ACTIONS];
                p[greedy.index()] = 1.0 - epsilon + epsilon / NUM_ACTIONS as f64;
                Ok(ActionDistribution(p))
            }
            Exploration::ExploreFirst { k } => {
                if t <= k {
                    Ok(ActionDistribution([1.0 / NUM_ACTIONS as f64; NUM_ACTIONS]))
                } else {
                    Ok(ActionDistribution::point(self.greedy(x)?))
                }
            }
            Exploration::Bagging { .. } | Exploration::OnlineCover { .. } => {
                self.cover_distribution(x, self.learners.len())
            }
        }
    }

    /// Samples an action and returns it with the exact probability it had.
    pub fn choose_action(&mut self, x: &FeatureVector, t: u64) -> Result<(Action, f64)> {
        let dist = self.distribution(x, t)?;
        let action = dist.sample(&mut self.rng);
        Ok((action, dist.prob(action)))
    }

    /// Learns from the cost observed for the chosen action only, weighting
    /// the update by `1 / prob`.
    pub fn bandit_update(
        &mut self,
        x: &FeatureVector,
        chosen: Action,
        cost: f64,
        prob: f64,
    ) -> Result<()> {
        if !cost.is_finite() {
            return Err(Error::NonFinite("observed cost"));
        }
        if !prob.is_finite() || prob > 1.0 + 1e-12 {
            return Err(Error::NonFinite("probability"));
        }
        let floor = self.config.probability_floor();
        if prob < floor - 1e-12 {
            return Err(Error::ProbabilityTooSmall { prob, floor });
        }
        let importance = 1.0 / prob;
        match self.config.exploration {
            Exploration::EpsilonGreedy { .. } | Exploration::ExploreFirst { .. } => {
                self.learners[0].importance_update(x, chosen, cost, importance)
            }
            Exploration::Bagging { .. } => {
                for i in 0..self.learners.len() {
                    let draw = self.poisson.sample(&mut self.rng);
                    if draw > 0.0 {
                        self.learners[i].importance_update(x, chosen, cost, draw * importance)?;
                    }
                }
                Ok(())
            }
            Exploration::OnlineCover { psi, .. } => {
                self.learners[0].importance_update(x, chosen, cost, importance)?;
                for i in 1..self.learners.len() {
                    // ĉ_i(a) = ĉ(a) − ψ / p_{i−1}(a), written as an importance-weighted target
                    let previous = self.cover_distribution(x, i)?;
                    let target = cost - psi * prob / previous.prob(chosen);
                    self.learners[i].importance_update(x, chosen, target, importance)?;
                }
                Ok(())
            }
        }
    }

    /// Full-information update of every learner (warm starts, planning).
    pub fn supervised_update(
        &mut self,
        x: &FeatureVector,
        truth: Decision,
        weight: f64,
    ) -> Result<()> {
        for learner in &mut self.learners {
            learner.supervised_update(x, truth, weight)?;
        }
        Ok(())
    }
}

/// Greedy full-information baseline: predicts `argmin` cost, then learns from
/// the true decision for both actions.
#[derive(Clone, Debug)]
pub struct SupervisedBaseline {
    learner: CostSensitiveLearner,
}

impl SupervisedBaseline {
    pub fn new(dim: usize, rate: LearningRate) -> Self {
        SupervisedBaseline {
            learner: CostSensitiveLearner::new(dim, rate),
        }
    }

    pub(crate) fn from_learner(learner: CostSensitiveLearner) -> Self {
        SupervisedBaseline { learner }
    }

    pub fn learner(&self) -> &CostSensitiveLearner {
        &self.learner
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Action> {
        Ok(argmin(&self.learner.predict_costs(x)?))
    }

    pub fn update(&mut self, x: &FeatureVector, truth: Decision, weight: f64) -> Result<()> {
        self.learner.supervised_update(x, truth, weight)
    }
}

/// Either engine behind one interface, so the harness can stream both.
#[derive(Clone, Debug)]
pub enum Agent {
    Bandit(Bandit),
    Supervised(SupervisedBaseline),
}

impl Agent {
    pub fn predict_costs(&self, x: &FeatureVector) -> Result<[f64; NUM_ACTIONS]> {
        match self {
            Agent::Bandit(b) => b.predict_costs(x),
            Agent::Supervised(s) => s.learner.predict_costs(x),
        }
    }

    pub fn supervised_update(
        &mut self,
        x: &FeatureVector,
        truth: Decision,
        weight: f64,
    ) -> Result<()> {
        match self {
            Agent::Bandit(b) => b.supervised_update(x, truth, weight),
            Agent::Supervised(s) => s.update(x, truth, weight),
        }
    }

    pub fn greedy(&self, x: &FeatureVector) -> Result<Action> {
        Ok(argmin(&self.predict_costs(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> FeatureVector {
        FeatureVector::from_pairs(vec![(0, 1.0), (2, 1.0)])
    }

    fn bandit(exploration: Exploration, seed: u64) -> Bandit {
        Bandit::new(BanditConfig::new(exploration, seed), 4).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(
            BanditConfig::new(Exploration::EpsilonGreedy { epsilon: 1.5 }, 0)
                .validate()
                .is_err()
        );
        assert!(BanditConfig::new(Exploration::Bagging { bags: 0 }, 0)
            .validate()
            .is_err());
        assert!(BanditConfig::new(
            Exploration::OnlineCover {
                policies: 2,
                psi: 0.0
            },
            0
        )
        .validate()
        .is_err());
        assert!(BanditConfig::new(
            Exploration::OnlineCover {
                policies: 2,
                psi: 0.01
            },
            0
        )
        .validate()
        .is_ok());
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let mut b = bandit(Exploration::EpsilonGreedy { epsilon: 0.0 }, 1);
        for t in 1..50 {
            let (a, p) = b.choose_action(&x(), t).unwrap();
            assert_eq!(a, Action::Permit);
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn explore_first_is_uniform_then_greedy() {
        let b = bandit(Exploration::ExploreFirst { k: 10 }, 1);
        assert_eq!(b.distribution(&x(), 3).unwrap().0, [0.5, 0.5]);
        assert_eq!(b.distribution(&x(), 10).unwrap().0, [0.5, 0.5]);
        assert_eq!(b.distribution(&x(), 11).unwrap().0, [1.0, 0.0]);
    }

    #[test]
    fn smoothed_distribution_respects_floor() {
        for votes in [[0, 3], [1, 1], [2, 0], [5, 7]] {
            let d = ActionDistribution::smoothed(&votes, DEFAULT_P_MIN);
            assert!((d.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.0.iter().all(|&p| p >= DEFAULT_P_MIN - 1e-15));
        }
    }

    #[test]
    fn rejects_small_probabilities() {
        let mut b = bandit(
            Exploration::OnlineCover {
                policies: 2,
                psi: 0.01,
            },
            1,
        );
        assert!(matches!(
            b.bandit_update(&x(), Action::Deny, 1.0, 0.001),
            Err(Error::ProbabilityTooSmall { .. })
        ));
        let mut e = bandit(Exploration::EpsilonGreedy { epsilon: 0.01 }, 1);
        assert!(e.bandit_update(&x(), Action::Deny, 1.0, 0.005).is_ok());
        assert!(e.bandit_update(&x(), Action::Deny, 1.0, 0.004).is_err());
    }

    #[test]
    fn ips_with_certain_choice_is_raw_cost() {
        assert_eq!(ips_estimate(Action::Permit, 1.0, 1.0), [1.0, 0.0]);
        assert_eq!(ips_estimate(Action::Deny, 0.0, 1.0), [0.0, 0.0]);
    }

    #[test]
    fn clone_reset_and_determinism() {
        let mut a = bandit(Exploration::EpsilonGreedy { epsilon: 0.3 }, 9);
        a.bandit_update(&x(), Action::Permit, 1.0, 0.85).unwrap();
        let fresh = a.clone_reset();
        assert_eq!(fresh.predict_costs(&x()).unwrap(), [0.5, 0.5]);

        let run = |seed| {
            let mut b = bandit(Exploration::EpsilonGreedy { epsilon: 0.3 }, seed);
            (1..=100)
                .map(|t| {
                    let (a, p) = b.choose_action(&x(), t).unwrap();
                    let cost = if a == Action::Permit { 0.0 } else { 1.0 };
                    b.bandit_update(&x(), a, cost, p).unwrap();
                    a
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn bagging_zero_draw_leaves_bag_unchanged() {
        // with a single bag, some round must draw Poisson(1) = 0 (probability e^-1)
        let mut b = bandit(Exploration::Bagging { bags: 1 }, 3);
        let mut saw_zero = false;
        for _ in 0..20 {
            let before = b.learners()[0].clone();
            b.bandit_update(&x(), Action::Deny, 1.0, 0.5).unwrap();
            if b.learners()[0] == before {
                saw_zero = true;
            }
        }
        assert!(saw_zero);
    }
}
