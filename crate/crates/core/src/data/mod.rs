//! Dataset construction: the manual home-IoT policies, random policy
//! synthesis, complete and partial log generation, log files and external CSVs.

mod external;
mod logs;
mod manual;
mod random;

use std::sync::Arc;

pub use external::{load_external_csv, ExternalCsvOptions, EXTERNAL_OPERATION, HASHING_THRESHOLD};
pub use logs::{
    gen_complete_log, gen_complete_log_capped, load_log, load_log_with_schema, sample_partial_log,
    save_log, shuffle_log, DEFAULT_ENUMERATION_LIMIT,
};
pub use manual::{manual_hierarchy, manual_policy, manual_policy_schema};
pub use random::{gen_random_policy, partition_sizes, RandomPolicyConfig};

use crate::abac::{AbacPolicy, AccessLog, AttributeSchema};
use crate::error::Result;
use crate::featurizer::FeatureMode;
use crate::planning::ValueHierarchy;

pub const DEFAULT_PARTIAL_FRACTION: f64 = 0.5;

/// Everything an experiment needs about one dataset.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub schema: Arc<AttributeSchema>,
    /// Ground truth; absent for replayed external data.
    pub policy: Option<AbacPolicy>,
    pub log: AccessLog,
    pub hierarchy: Option<ValueHierarchy>,
    pub mode: FeatureMode,
}

impl DatasetBundle {
    /// Complete log of a policy, in enumeration order.
    pub fn from_policy(policy: AbacPolicy, hierarchy: Option<ValueHierarchy>) -> Result<Self> {
        let log = gen_complete_log(&policy)?;
        Ok(DatasetBundle {
            schema: Arc::clone(&policy.schema),
            policy: Some(policy),
            log,
            hierarchy,
            mode: FeatureMode::Exact,
        })
    }

    /// A named built-in dataset: `m1`, `m2`, `m3` or the synthetic `s1`, `s2`, `s3`
    /// (generated from `seed`).
    pub fn builtin(id: &str, seed: u64) -> Result<Self> {
        match id {
            "m1" | "m2" | "m3" => Self::from_policy(manual_policy(id)?, manual_hierarchy(id)?),
            _ => Self::from_policy(
                gen_random_policy(&RandomPolicyConfig::preset(id, seed)?)?,
                None,
            ),
        }
    }

    pub fn with_log(mut self, log: AccessLog) -> Self {
        self.log = log;
        self
    }
}
