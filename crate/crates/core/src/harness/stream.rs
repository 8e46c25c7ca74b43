use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, Reference, RunSettings};
use crate::abac::{AccessLog, Decision};
use crate::error::{Error, Result};
use crate::featurizer::{build_feature_space, featurize, FeatureSpace, FeatureVector};
use crate::feedback::{simulate_feedback, FeedbackRecord, OwnerModel};
use crate::learners::{Action, Agent, Bandit, SupervisedBaseline};
use crate::planning::{Planner, ValueHierarchy};
use crate::warmstart::{apply_warmstart, Enumeration, WarmstartExample, WarmstartSpec};

/// One interaction round. `loss` is 1 iff the action differs from the logged decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub action: Decision,
    pub truth: Decision,
    pub loss: u8,
    pub probability: f64,
    pub cost: f64,
    /// Mean loss over rounds `1..=t`.
    pub pvl: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<RoundRecord>,
    pub feedback: Vec<FeedbackRecord>,
    pub final_pvl: f64,
    pub majority_loss: f64,
    /// Last round of the first stream in a shift run.
    pub shift_round: Option<u64>,
    /// Labels inferred by planning.
    pub planned: u64,
    pub warmstart_examples: usize,
    pub algorithm: String,
    pub hyperparameter: String,
    pub seconds: f64,
    pub config: serde_json::Value,
}

fn mean_loss(records: &[RoundRecord]) -> f64 {
    records.iter().map(|r| r.loss as u64).sum::<u64>() as f64 / records.len() as f64
}

/// `(1/n) Σ loss_t`.
pub fn progressive_validation_loss(records: &[RoundRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    Ok(mean_loss(records))
}

/// Mean loss over record positions `[from, to)`.
pub fn windowed_loss(records: &[RoundRecord], from: usize, to: usize) -> Result<f64> {
    if from >= to || to > records.len() {
        return Err(Error::Empty("loss window"));
    }
    Ok(mean_loss(&records[from..to]))
}

/// Decision-making side of a run.
enum Player {
    Learner(Agent),
    Oracle,
    AntiOracle,
    Uniform(ChaCha8Rng),
}

impl Player {
    fn new(settings: &RunSettings, dim: usize) -> Result<Player> {
        Ok(match settings.algorithm {
            Algorithm::Bandit(_) => {
                let cfg = settings.bandit_config().expect("bandit algorithm");
                Player::Learner(Agent::Bandit(Bandit::new(cfg, dim)?))
            }
            Algorithm::Reference(Reference::Supervised) => Player::Learner(Agent::Supervised(
                SupervisedBaseline::new(dim, settings.learning_rate),
            )),
            Algorithm::Reference(Reference::Oracle) => Player::Oracle,
            Algorithm::Reference(Reference::AntiOracle) => Player::AntiOracle,
            Algorithm::Reference(Reference::UniformRandom) => {
                Player::Uniform(ChaCha8Rng::seed_from_u64(stream_seed(settings.seed, 3)))
            }
        })
    }

    fn choose(&mut self, x: &FeatureVector, t: u64, logged: Decision) -> Result<(Action, f64)> {
        Ok(match self {
            Player::Learner(Agent::Bandit(b)) => b.choose_action(x, t)?,
            Player::Learner(Agent::Supervised(s)) => (s.predict(x)?, 1.0),
            Player::Oracle => (logged.into(), 1.0),
            Player::AntiOracle => (logged.opposite().into(), 1.0),
            Player::Uniform(rng) => (Action::from_index(rng.random_range(0..2)), 0.5),
        })
    }

    fn learn(
        &mut self,
        x: &FeatureVector,
        chosen: Action,
        prob: f64,
        fb: &FeedbackRecord,
    ) -> Result<()> {
        match self {
            Player::Learner(Agent::Bandit(b)) => b.bandit_update(x, chosen, fb.cost, prob),
            Player::Learner(Agent::Supervised(s)) => s.update(x, fb.revealed_decision(), 1.0),
            _ => Ok(()),
        }
    }

    fn learn_full(&mut self, x: &FeatureVector, truth: Decision) -> Result<()> {
        match self {
            Player::Learner(agent) => agent.supervised_update(x, truth, 1.0),
            _ => Ok(()),
        }
    }
}

/// Independent RNG streams per purpose, derived from the run seed.
fn stream_seed(seed: u64, purpose: u64) -> u64 {
    seed ^ purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Prepared inputs of a streaming run.
pub struct StreamInput<'a> {
    pub log: &'a AccessLog,
    pub space: &'a FeatureSpace,
    pub owners: &'a OwnerModel,
    pub hierarchy: Option<&'a ValueHierarchy>,
    pub warmstart: &'a [WarmstartExample],
}

struct Pending {
    t: u64,
    index: usize,
    x: FeatureVector,
    action: Action,
    prob: f64,
}

/// Replays `input.log` through the configured agent: choose, score, simulate
/// feedback, learn (after `delay` rounds), and plan when enabled.
pub fn run_stream_with(input: &StreamInput<'_>, settings: &RunSettings) -> Result<RunResult> {
    settings.validate()?;
    if input.log.is_empty() {
        return Err(Error::Empty("log"));
    }
    if input.space.schema().as_ref() != input.log.schema().as_ref() {
        return Err(Error::SchemaMismatch(
            "feature space and log use different schemas".into(),
        ));
    }
    let started = Instant::now();
    let mut player = Player::new(settings, input.space.dim())?;
    if let Player::Learner(agent) = &mut player {
        apply_warmstart(
            agent,
            input.warmstart,
            input.space,
            settings.warmstart_passes,
            stream_seed(settings.seed, 2),
        )?;
    }
    let mut planner = match (settings.planning, input.hierarchy) {
        (true, Some(h)) => Some(Planner::new(h.clone())),
        (true, None) => return Err(Error::InvalidConfig("planning needs a hierarchy".into())),
        (false, _) => None,
    };

    let mut fb_rng = ChaCha8Rng::seed_from_u64(stream_seed(settings.seed, 1));
    let n = input.log.len();
    let mut records = Vec::with_capacity(n);
    let mut feedback = Vec::with_capacity(n);
    let mut pending: VecDeque<Pending> = VecDeque::new();
    let mut cumulative = 0u64;
    let mut planned = 0u64;
    let fb_cfg = settings.feedback;

    for (index, entry) in input.log.entries().iter().enumerate() {
        let t = index as u64 + 1;
        let round = |e: Error| e.at_round(t as usize);
        let x = featurize(&entry.state, input.space).map_err(round)?;
        let (action, prob) = player.choose(&x, t, entry.decision).map_err(round)?;
        let engine = Decision::from(action);
        let loss = u8::from(engine != entry.decision);
        cumulative += loss as u64;
        let fb = simulate_feedback(
            input.owners,
            &entry.state,
            entry.decision,
            engine,
            fb_cfg.rate,
            &fb_cfg.weights,
            &mut fb_rng,
        )
        .map_err(round)?;
        records.push(RoundRecord {
            t,
            action: engine,
            truth: entry.decision,
            loss,
            probability: prob,
            cost: fb.cost,
            pvl: cumulative as f64 / t as f64,
        });
        feedback.push(fb);
        pending.push_back(Pending {
            t,
            index,
            x,
            action,
            prob,
        });

        while pending.front().is_some_and(|p| p.t + fb_cfg.delay <= t) {
            let p = pending.pop_front().expect("non-empty");
            let fb = &feedback[p.index];
            player.learn(&p.x, p.action, p.prob, fb).map_err(round)?;
            if let Some(planner) = &mut planner {
                let state = &input.log.entries()[p.index].state;
                for (s, d) in planner.observe(state, fb.revealed_decision()) {
                    let xs = featurize(&s, input.space).map_err(round)?;
                    player.learn_full(&xs, d).map_err(round)?;
                    planned += 1;
                }
            }
        }
    }

    Ok(RunResult {
        final_pvl: cumulative as f64 / n as f64,
        majority_loss: input.log.majority_loss(),
        records,
        feedback,
        shift_round: None,
        planned,
        warmstart_examples: input.warmstart.len(),
        algorithm: settings.algorithm.name().into(),
        hyperparameter: settings.algorithm.hyperparameter(),
        seconds: started.elapsed().as_secs_f64(),
        config: serde_json::to_value(settings)?,
    })
}

fn feature_space(
    cfg: &ExperimentConfig,
    bundle: &crate::data::DatasetBundle,
) -> Result<FeatureSpace> {
    build_feature_space(Arc::clone(&bundle.schema), bundle.mode, cfg.hash_size)
}

/// Loads everything an [`ExperimentConfig`] names and streams it.
pub fn run_stream(cfg: &ExperimentConfig) -> Result<RunResult> {
    let bundle = cfg.load_dataset()?;
    run_on_bundle(cfg, &bundle)
}

/// Streams an already loaded dataset with the settings of `cfg`.
pub fn run_on_bundle(
    cfg: &ExperimentConfig,
    bundle: &crate::data::DatasetBundle,
) -> Result<RunResult> {
    let space = feature_space(cfg, bundle)?;
    let warmstart = match &cfg.warmstart {
        Some(path) => WarmstartSpec::load(path)?.examples(
            &bundle.schema,
            Enumeration {
                seed: cfg.run.seed,
                ..Enumeration::default()
            },
        )?,
        None => Vec::new(),
    };
    let owners = OwnerModel::single_replay();
    let input = StreamInput {
        log: &bundle.log,
        space: &space,
        owners: &owners,
        hierarchy: bundle.hierarchy.as_ref(),
        warmstart: &warmstart,
    };
    let mut result = run_stream_with(&input, &cfg.run)?;
    result.config = serde_json::to_value(cfg)?;
    Ok(result)
}

/// Streams `a` then `b` through one learner over the union of their schemas.
pub fn run_shift(a: &AccessLog, b: &AccessLog, settings: &RunSettings) -> Result<RunResult> {
    let union = Arc::new(a.schema().union(b.schema())?);
    let mut entries = a.reencode(&union)?.into_entries();
    entries.extend(b.reencode(&union)?.into_entries());
    let joined = AccessLog::from_entries(Arc::clone(&union), entries)?;
    let space = build_feature_space(union, crate::featurizer::FeatureMode::Exact, None)?;
    let owners = OwnerModel::single_replay();
    let input = StreamInput {
        log: &joined,
        space: &space,
        owners: &owners,
        hierarchy: None,
        warmstart: &[],
    };
    let mut result = run_stream_with(&input, settings)?;
    result.shift_round = Some(a.len() as u64);
    Ok(result)
}
