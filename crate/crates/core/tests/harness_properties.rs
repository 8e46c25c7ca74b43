use std::sync::Arc;

use proptest::prelude::*;

use abac_bandit::abac::{AccessLog, Decision, LogEntry};
use abac_bandit::data::{gen_complete_log, manual_policy, shuffle_log, DatasetBundle};
use abac_bandit::featurizer::{build_feature_space, FeatureMode};
use abac_bandit::feedback::OwnerModel;
use abac_bandit::harness::{
    compare_algorithms, progressive_validation_loss, run_shift, run_stream_with, windowed_loss,
    Algorithm, DatasetSpec, ExperimentConfig, Reference, RoundRecord, RunResult, RunSettings,
    StreamInput,
};
use abac_bandit::learners::Exploration;

const WINDOW: usize = 200;

fn bandits() -> Vec<Algorithm> {
    [
        Exploration::EpsilonGreedy { epsilon: 0.05 },
        Exploration::ExploreFirst { k: 100 },
        Exploration::Bagging { bags: 4 },
        Exploration::OnlineCover {
            policies: 2,
            psi: 0.01,
        },
    ]
    .into_iter()
    .map(Algorithm::Bandit)
    .collect()
}

fn every_algorithm() -> Vec<Algorithm> {
    let mut v = bandits();
    v.push(Algorithm::Reference(Reference::Supervised));
    v
}

fn stream(log: &AccessLog, algorithm: Algorithm, seed: u64) -> RunResult {
    let space = build_feature_space(Arc::clone(log.schema()), FeatureMode::Exact, None).unwrap();
    let owners = OwnerModel::single_replay();
    let input = StreamInput {
        log,
        space: &space,
        owners: &owners,
        hierarchy: None,
        warmstart: &[],
    };
    run_stream_with(&input, &RunSettings::new(algorithm, seed)).unwrap()
}

fn m_log(id: &str, seed: u64) -> AccessLog {
    shuffle_log(
        &gen_complete_log(&manual_policy(id).unwrap()).unwrap(),
        seed,
    )
}

fn inverted(log: &AccessLog) -> AccessLog {
    let entries = log
        .entries()
        .iter()
        .map(|e| LogEntry {
            state: e.state.clone(),
            decision: e.decision.opposite(),
        })
        .collect();
    AccessLog::from_entries(Arc::clone(log.schema()), entries).unwrap()
}

/// Highest window-200 loss among windows starting in `[from, to)`.
fn peak(records: &[RoundRecord], from: usize, to: usize) -> f64 {
    (from..to)
        .step_by(10)
        .map(|s| windowed_loss(records, s, s + WINDOW).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn learning_happens_on_every_synthetic_dataset() {
    for id in ["s1", "s2", "s3"] {
        let bundle = DatasetBundle::builtin(id, 0).unwrap();
        let log = shuffle_log(&bundle.log, 1);
        let n = log.len();
        let tenth = n / 10;
        for a in bandits() {
            let r = stream(&log, a, 0);
            let first = windowed_loss(&r.records, 0, tenth).unwrap();
            let last = windowed_loss(&r.records, n - tenth, n).unwrap();
            assert!(
                last <= first,
                "{id} {}: last {last} > first {first}",
                a.name()
            );
        }
    }
}

#[test]
fn every_algorithm_recovers_from_a_policy_shift() {
    let a = m_log("m1", 61);
    let b = m_log("m2", 62);
    for algorithm in every_algorithm() {
        let r = run_shift(&a, &b, &RunSettings::new(algorithm, 0)).unwrap();
        let shift = r.shift_round.unwrap() as usize;
        assert_eq!(shift, 5600);
        let n = r.records.len();
        let top = peak(&r.records, shift, shift + 1000 - WINDOW);
        let tail = windowed_loss(&r.records, n - (n - shift) / 10, n).unwrap();
        assert!(
            tail < top,
            "{}: tail {tail} >= peak {top}",
            algorithm.name()
        );
    }
}

#[test]
fn identical_policy_shift_is_flat() {
    let a = m_log("m1", 61);
    let b = m_log("m1", 63);
    for algorithm in every_algorithm() {
        let r = run_shift(&a, &b, &RunSettings::new(algorithm, 0)).unwrap();
        let shift = r.shift_round.unwrap() as usize;
        let pre = windowed_loss(&r.records, shift - 2000, shift).unwrap();
        let post = windowed_loss(&r.records, shift, shift + 2000).unwrap();
        let ratio = post / pre;
        assert!(
            (0.8..=1.25).contains(&ratio),
            "{}: pre {pre} post {post}",
            algorithm.name()
        );
    }
}

#[test]
fn inverted_policy_shift_starts_mostly_wrong() {
    let a = m_log("m1", 61);
    let b = inverted(&m_log("m1", 64));
    for algorithm in every_algorithm() {
        let r = run_shift(&a, &b, &RunSettings::new(algorithm, 0)).unwrap();
        let shift = r.shift_round.unwrap() as usize;
        let right_after = windowed_loss(&r.records, shift, shift + WINDOW).unwrap();
        assert!(right_after > 0.5, "{}: {right_after}", algorithm.name());
    }
}

#[test]
fn comparison_table_beats_majority_on_synthetic_data() {
    let mut cells = Vec::new();
    for id in ["m1", "m2", "m3", "s1", "s2", "s3"] {
        let dataset = DatasetSpec::Builtin {
            id: id.into(),
            seed: Some(0),
            fraction: None,
            shuffle: true,
        };
        for a in every_algorithm() {
            cells.push(ExperimentConfig::new(
                dataset.clone(),
                RunSettings::new(a, 0),
            ));
        }
        // planning needs a hierarchy, which only m3 ships with
        if id == "m3" {
            let mut run = RunSettings::new(bandits()[3], 0);
            run.planning = true;
            cells.push(ExperimentConfig::new(dataset.clone(), run));
        }
    }
    let rows = compare_algorithms(&cells);
    assert_eq!(rows.len(), 31);
    for r in &rows {
        assert!(
            r.error.is_none(),
            "{} {}: {:?}",
            r.dataset,
            r.algorithm,
            r.error
        );
        if r.dataset.starts_with('s') {
            let (pvl, majority) = (r.pvl.unwrap(), r.majority_loss.unwrap());
            assert!(
                pvl < majority,
                "{} {}: {pvl} >= {majority}",
                r.dataset,
                r.algorithm
            );
        }
    }
}

fn reference_pvl(losses: &[u8]) -> f64 {
    let mut total = 0usize;
    for &l in losses {
        if l == 1 {
            total += 1;
        }
    }
    total as f64 / losses.len() as f64
}

proptest! {
    #[test]
    fn pvl_matches_a_second_implementation(losses in prop::collection::vec(0u8..2, 1..500)) {
        let records: Vec<RoundRecord> = losses
            .iter()
            .enumerate()
            .map(|(i, &loss)| RoundRecord {
                t: i as u64 + 1,
                action: Decision::Permit,
                truth: if loss == 1 { Decision::Deny } else { Decision::Permit },
                loss,
                probability: 1.0,
                cost: loss as f64,
                pvl: 0.0,
            })
            .collect();
        prop_assert_eq!(progressive_validation_loss(&records).unwrap(), reference_pvl(&losses));
        let mid = losses.len() / 2;
        if mid > 0 {
            prop_assert_eq!(windowed_loss(&records, 0, mid).unwrap(), reference_pvl(&losses[..mid]));
        }
    }
}

#[test]
fn cumulative_pvl_column_is_the_running_mean() {
    let r = stream(&m_log("m2", 5), bandits()[2], 3);
    let mut sum = 0u64;
    for (i, rec) in r.records.iter().enumerate() {
        sum += rec.loss as u64;
        assert_eq!(rec.pvl, sum as f64 / (i + 1) as f64);
        // default feedback: the learner's cost is the indicator loss
        assert_eq!(rec.cost, rec.loss as f64);
    }
}
