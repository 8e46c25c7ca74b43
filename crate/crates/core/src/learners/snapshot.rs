//! Versioned JSON model snapshots. Weights are stored sparsely (non-zero
//! slots only) so hashed feature spaces stay small on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bandit::{Agent, Bandit, BanditConfig, SupervisedBaseline};
use super::base::{CostSensitiveLearner, LearningRate, ACTIONS};
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LearnerDump {
    dim: usize,
    rate: LearningRate,
    updates: [u64; 2],
    /// Per action: `(slot, weight)` for non-zero weights.
    weights: [Vec<(u32, f64)>; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    /// Absent for the supervised baseline.
    config: Option<BanditConfig>,
    learners: Vec<LearnerDump>,
}

fn dump(learner: &CostSensitiveLearner) -> LearnerDump {
    let weights = ACTIONS.map(|a| {
        learner
            .weights(a)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as u32, *w))
            .collect()
    });
    LearnerDump {
        dim: learner.dim(),
        rate: learner.rate(),
        updates: ACTIONS.map(|a| learner.updates(a)),
        weights,
    }
}

fn restore(d: LearnerDump) -> Result<CostSensitiveLearner> {
    let mut dense = [vec![0.0; d.dim], vec![0.0; d.dim]];
    for (a, sparse) in d.weights.into_iter().enumerate() {
        for (slot, w) in sparse {
            let cell = dense[a].get_mut(slot as usize).ok_or_else(|| {
                Error::InvalidConfig(format!("snapshot slot {slot} exceeds dimension {}", d.dim))
            })?;
            *cell = w;
        }
    }
    Ok(CostSensitiveLearner::from_parts(dense, d.updates, d.rate))
}

pub fn snapshot_to_json(agent: &Agent) -> String {
    let snapshot = match agent {
        Agent::Bandit(b) => Snapshot {
            version: SNAPSHOT_VERSION,
            config: Some(*b.config()),
            learners: b.learners().iter().map(dump).collect(),
        },
        Agent::Supervised(s) => Snapshot {
            version: SNAPSHOT_VERSION,
            config: None,
            learners: vec![dump(s.learner())],
        },
    };
    serde_json::to_string(&snapshot).expect("snapshot serializes")
}

/// Restores weights and configuration. The RNG restarts from the configured seed.
pub fn snapshot_from_json(text: &str) -> Result<Agent> {
    let snapshot: Snapshot = serde_json::from_str(text)?;
    if snapshot.version != SNAPSHOT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported snapshot version {}",
            snapshot.version
        )));
    }
    let learners = snapshot
        .learners
        .into_iter()
        .map(restore)
        .collect::<Result<Vec<_>>>()?;
    match snapshot.config {
        Some(config) => Ok(Agent::Bandit(Bandit::from_learners(config, learners)?)),
        None => {
            let learner = learners
                .into_iter()
                .next()
                .ok_or(Error::Empty("snapshot learners"))?;
            Ok(Agent::Supervised(SupervisedBaseline::from_learner(learner)))
        }
    }
}

pub fn save_snapshot(agent: &Agent, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, snapshot_to_json(agent)).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Agent> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    snapshot_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abac::Decision;
    use crate::featurizer::FeatureVector;
    use crate::learners::{Action, Exploration};

    #[test]
    fn round_trip_preserves_predictions() {
        let xs: Vec<FeatureVector> = (0..6)
            .map(|i| FeatureVector::from_pairs(vec![(i, 1.0), (6 + i % 3, 1.0)]))
            .collect();
        let config = BanditConfig::new(
            Exploration::OnlineCover {
                policies: 2,
                psi: 0.01,
            },
            5,
        );
        let mut bandit = Bandit::new(config, 9).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let a = if i % 2 == 0 {
                Action::Permit
            } else {
                Action::Deny
            };
            bandit
                .bandit_update(x, a, (i % 3 == 0) as u8 as f64, 0.5)
                .unwrap();
        }
        let agent = Agent::Bandit(bandit);
        let restored = snapshot_from_json(&snapshot_to_json(&agent)).unwrap();
        for x in &xs {
            assert_eq!(
                agent.predict_costs(x).unwrap(),
                restored.predict_costs(x).unwrap()
            );
        }

        let mut sup = SupervisedBaseline::new(9, LearningRate::default());
        sup.update(&xs[0], Decision::Deny, 1.0).unwrap();
        let agent = Agent::Supervised(sup);
        let restored = snapshot_from_json(&snapshot_to_json(&agent)).unwrap();
        assert_eq!(
            agent.predict_costs(&xs[0]).unwrap(),
            restored.predict_costs(&xs[0]).unwrap()
        );
    }

    #[test]
    fn rejects_unknown_version() {
        let text = r#"{"version": 99, "config": null, "learners": []}"#;
        assert!(snapshot_from_json(text).is_err());
    }
}
