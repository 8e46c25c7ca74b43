use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stream::{RoundRecord, RunResult};
use crate::error::{Error, Result};
use crate::feedback::write_feedback_trace;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FEEDBACK_FILE: &str = "feedback.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub hyperparameter: String,
    pub rounds: usize,
    pub final_pvl: f64,
    pub majority_loss: f64,
    pub shift_round: Option<u64>,
    pub planned: u64,
    pub warmstart_examples: usize,
    /// Wall clock; the only field that varies between identical runs.
    pub seconds: f64,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn of(result: &RunResult) -> Self {
        Summary {
            algorithm: result.algorithm.clone(),
            hyperparameter: result.hyperparameter.clone(),
            rounds: result.records.len(),
            final_pvl: result.final_pvl,
            majority_loss: result.majority_loss,
            shift_round: result.shift_round,
            planned: result.planned,
            warmstart_examples: result.warmstart_examples,
            seconds: result.seconds,
            config: result.config.clone(),
        }
    }
}

/// Writes the trajectory CSV, the summary JSON and the feedback trace into `dir`.
pub fn emit_outputs(result: &RunResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(TRAJECTORY_FILE);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)?;
    for r in &result.records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SUMMARY_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&Summary::of(result))?)
        .map_err(|e| Error::io(&path, e))?;

    write_feedback_trace(
        dir.join(FEEDBACK_FILE),
        result
            .records
            .iter()
            .zip(&result.feedback)
            .map(|(r, f)| (r.t as usize, f)),
    )
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<RoundRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<RoundRecord>, _>>()?)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Algorithm, DatasetSpec, ExperimentConfig, RunSettings};
    use crate::harness::stream::run_stream;
    use crate::learners::Exploration;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::new(
            DatasetSpec::Builtin {
                id: "m2".into(),
                seed: None,
                fraction: Some(0.1),
                shuffle: true,
            },
            RunSettings::new(Algorithm::Bandit(Exploration::ExploreFirst { k: 50 }), 5),
        );
        let result = run_stream(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&result, dir.path()).unwrap();

        let back = read_trajectory(dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(back, result.records);
        assert!(back.windows(2).all(|w| w[1].t == w[0].t + 1));
        let text = std::fs::read_to_string(dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(text.lines().count(), result.records.len() + 1);

        let s = read_summary(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(s.final_pvl, result.final_pvl);
        assert_eq!(s.rounds, 504);
        let fb = std::fs::read_to_string(dir.path().join(FEEDBACK_FILE)).unwrap();
        assert_eq!(fb.lines().count(), 505);
    }
}
