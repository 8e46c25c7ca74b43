use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abac::load_policy;
use crate::data::{
    load_external_csv, load_log, load_log_with_schema, sample_partial_log, shuffle_log,
    DatasetBundle, ExternalCsvOptions,
};
use crate::error::{Error, Result};
use crate::featurizer::FeatureMode;
use crate::feedback::RewardWeights;
use crate::learners::{BanditConfig, Exploration, LearningRate, DEFAULT_P_MIN};
use crate::planning::ValueHierarchy;

/// Agents that are not contextual bandits: the full-information baseline and
/// three fixed reference players used to sanity-check the metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum Reference {
    Supervised,
    /// Answers the logged decision.
    Oracle,
    /// Answers the opposite of the logged decision.
    AntiOracle,
    /// Answers uniformly at random.
    UniformRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Algorithm {
    Bandit(Exploration),
    Reference(Reference),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bandit(e) => e.name(),
            Algorithm::Reference(Reference::Supervised) => "supervised",
            Algorithm::Reference(Reference::Oracle) => "oracle",
            Algorithm::Reference(Reference::AntiOracle) => "anti_oracle",
            Algorithm::Reference(Reference::UniformRandom) => "uniform_random",
        }
    }

    pub fn hyperparameter(&self) -> String {
        match self {
            Algorithm::Bandit(e) => e.hyperparameter(),
            Algorithm::Reference(_) => "NA".into(),
        }
    }

    pub fn is_learner(&self) -> bool {
        matches!(
            self,
            Algorithm::Bandit(_) | Algorithm::Reference(Reference::Supervised)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    /// Probability that a disagreeing owner speaks up.
    pub rate: f64,
    /// Rounds between a decision and the learner seeing its feedback.
    pub delay: u64,
    pub weights: RewardWeights,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            rate: 1.0,
            delay: 0,
            weights: RewardWeights::default(),
        }
    }
}

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}

fn default_passes() -> usize {
    1
}

/// Everything about a run except where its data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub seed: u64,
    #[serde(default)]
    pub learning_rate: LearningRate,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default)]
    pub planning: bool,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    #[serde(default = "default_passes")]
    pub warmstart_passes: usize,
}

impl RunSettings {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        RunSettings {
            algorithm,
            seed,
            learning_rate: LearningRate::default(),
            p_min: DEFAULT_P_MIN,
            planning: false,
            feedback: FeedbackConfig::default(),
            warmstart_passes: 1,
        }
    }

    pub fn bandit_config(&self) -> Option<BanditConfig> {
        match self.algorithm {
            Algorithm::Bandit(exploration) => Some(BanditConfig {
                exploration,
                seed: self.seed,
                p_min: self.p_min,
                rate: self.learning_rate,
            }),
            Algorithm::Reference(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(cfg) = self.bandit_config() {
            cfg.validate()?;
        }
        if !(0.0..=1.0).contains(&self.feedback.rate) {
            return Err(Error::InvalidConfig(format!(
                "feedback rate {} outside [0, 1]",
                self.feedback.rate
            )));
        }
        self.feedback.weights.validate()
    }
}

fn default_true() -> bool {
    true
}

/// Where a run's log comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// A manual (`m1`–`m3`) or synthetic (`s1`–`s3`) complete log. `seed`
    /// drives synthetic policy generation and defaults to the run seed.
    Builtin {
        id: String,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        fraction: Option<f64>,
        #[serde(default = "default_true")]
        shuffle: bool,
    },
    /// A log CSV, streamed in file order unless `shuffle`. With `policy`, the
    /// policy file supplies the schema; otherwise it is inferred from the log.
    Log {
        path: PathBuf,
        #[serde(default)]
        policy: Option<PathBuf>,
        #[serde(default)]
        shuffle: bool,
    },
    /// A labeled CSV such as the Amazon access data.
    External {
        path: PathBuf,
        label_column: String,
        positive_label: String,
        #[serde(default)]
        object_columns: Vec<String>,
        #[serde(default)]
        shuffle: bool,
    },
}

impl DatasetSpec {
    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Builtin {
                id,
                fraction: Some(f),
                ..
            } => format!("{id}@{f}"),
            DatasetSpec::Builtin { id, .. } => id.clone(),
            DatasetSpec::Log { path, .. } | DatasetSpec::External { path, .. } => {
                path.file_stem().map_or_else(
                    || path.display().to_string(),
                    |s| s.to_string_lossy().into_owned(),
                )
            }
        }
    }

    /// Loads the bundle; `seed` is the run seed used for shuffling and sampling.
    pub fn load(&self, seed: u64) -> Result<DatasetBundle> {
        match self {
            DatasetSpec::Builtin {
                id,
                seed: policy_seed,
                fraction,
                shuffle,
            } => {
                let mut bundle = DatasetBundle::builtin(id, policy_seed.unwrap_or(seed))?;
                if let Some(f) = fraction {
                    bundle.log = sample_partial_log(&bundle.log, *f, seed)?;
                }
                if *shuffle {
                    bundle.log = shuffle_log(&bundle.log, seed);
                }
                Ok(bundle)
            }
            DatasetSpec::Log {
                path,
                policy,
                shuffle,
            } => {
                let (log, policy) = match policy {
                    Some(p) => {
                        let policy = load_policy(p)?;
                        (load_log_with_schema(path, &policy.schema)?, Some(policy))
                    }
                    None => (load_log(path)?, None),
                };
                let log = if *shuffle {
                    shuffle_log(&log, seed)
                } else {
                    log
                };
                Ok(DatasetBundle {
                    schema: Arc::clone(log.schema()),
                    policy,
                    log,
                    hierarchy: None,
                    mode: FeatureMode::Exact,
                })
            }
            DatasetSpec::External {
                path,
                label_column,
                positive_label,
                object_columns,
                shuffle,
            } => {
                let opts = ExternalCsvOptions {
                    object_columns: object_columns.clone(),
                };
                let mut bundle = load_external_csv(path, label_column, positive_label, &opts)?;
                if *shuffle {
                    bundle.log = shuffle_log(&bundle.log, seed);
                }
                Ok(bundle)
            }
        }
    }

    pub(crate) fn resolve_paths(&mut self, base: &Path) {
        match self {
            DatasetSpec::Builtin { .. } => {}
            DatasetSpec::Log { path, policy, .. } => {
                rebase(path, base);
                if let Some(p) = policy {
                    rebase(p, base);
                }
            }
            DatasetSpec::External { path, .. } => rebase(path, base),
        }
    }
}

pub(crate) fn rebase(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

/// One experiment: dataset, algorithm and optional warm start and planning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(flatten)]
    pub run: RunSettings,
    /// Warm-start spec file.
    #[serde(default)]
    pub warmstart: Option<PathBuf>,
    /// Hierarchy file; overrides a built-in dataset's own hierarchy.
    #[serde(default)]
    pub hierarchy: Option<PathBuf>,
    #[serde(default)]
    pub feature_mode: Option<FeatureMode>,
    #[serde(default)]
    pub hash_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, run: RunSettings) -> Self {
        ExperimentConfig {
            dataset,
            run,
            warmstart: None,
            hierarchy: None,
            feature_mode: None,
            hash_size: None,
        }
    }

    /// Makes relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        self.dataset.resolve_paths(base);
        if let Some(p) = &mut self.warmstart {
            rebase(p, base);
        }
        if let Some(p) = &mut self.hierarchy {
            rebase(p, base);
        }
    }

    /// Loads the dataset and attaches the configured hierarchy.
    pub fn load_dataset(&self) -> Result<DatasetBundle> {
        let mut bundle = self.dataset.load(self.run.seed)?;
        if let Some(path) = &self.hierarchy {
            bundle.hierarchy = Some(ValueHierarchy::load(Arc::clone(&bundle.schema), path)?);
        }
        if let Some(mode) = self.feature_mode {
            bundle.mode = mode;
        }
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json() {
        let text = r#"{
            "dataset": {"source": "builtin", "id": "m1", "fraction": 0.5},
            "algorithm": {"algo": "online_cover", "policies": 2, "psi": 0.01},
            "seed": 3,
            "planning": false
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(
            cfg.run.algorithm,
            Algorithm::Bandit(Exploration::OnlineCover {
                policies: 2,
                psi: 0.01
            })
        );
        assert_eq!(cfg.run.feedback, FeedbackConfig::default());
        assert_eq!(cfg.dataset.label(), "m1@0.5");
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let sup: Algorithm = serde_json::from_str(r#"{"algo": "supervised"}"#).unwrap();
        assert_eq!(sup, Algorithm::Reference(Reference::Supervised));
        assert!(serde_json::from_str::<Algorithm>(r#"{"algo": "softmax"}"#).is_err());
    }
}
