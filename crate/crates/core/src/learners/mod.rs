//! Cost-sensitive base learner, the four exploration strategies, and the
//! full-information supervised baseline.

mod bandit;
mod base;
mod snapshot;

pub use bandit::{
    ips_estimate, ActionDistribution, Agent, Bandit, BanditConfig, Exploration, SupervisedBaseline,
    DEFAULT_PSI, DEFAULT_P_MIN,
};
pub use base::{argmin, sigmoid, Action, CostSensitiveLearner, LearningRate, ACTIONS, NUM_ACTIONS};
pub use snapshot::{
    load_snapshot, save_snapshot, snapshot_from_json, snapshot_to_json, SNAPSHOT_VERSION,
};
