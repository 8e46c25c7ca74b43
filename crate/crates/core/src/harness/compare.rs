use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{
    rebase, Algorithm, DatasetSpec, ExperimentConfig, FeedbackConfig, RunSettings,
};
use super::stream::run_on_bundle;
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::par;

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Cross product of datasets, algorithms and seeds with shared settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub datasets: Vec<DatasetSpec>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub planning: bool,
    #[serde(default)]
    pub warmstart: Option<PathBuf>,
    #[serde(default)]
    pub hierarchy: Option<PathBuf>,
    #[serde(default)]
    pub feedback: FeedbackConfig,
}

/// A comparison matrix: explicit cells, a grid, or both.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    #[serde(default)]
    pub cells: Vec<ExperimentConfig>,
    #[serde(default)]
    pub grid: Option<Grid>,
}

impl Matrix {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Matrix = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut m.cells {
            c.resolve_paths(base);
        }
        if let Some(g) = &mut m.grid {
            for d in &mut g.datasets {
                d.resolve_paths(base);
            }
            for p in [&mut g.warmstart, &mut g.hierarchy].into_iter().flatten() {
                rebase(p, base);
            }
        }
        Ok(m)
    }

    /// All cells, explicit ones first, grid cells dataset-major.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let mut out = self.cells.clone();
        if let Some(g) = &self.grid {
            for d in &g.datasets {
                for &a in &g.algorithms {
                    for &seed in &g.seeds {
                        let mut run = RunSettings::new(a, seed);
                        run.planning = g.planning;
                        run.feedback = g.feedback;
                        let mut cfg = ExperimentConfig::new(d.clone(), run);
                        cfg.warmstart = g.warmstart.clone();
                        cfg.hierarchy = g.hierarchy.clone();
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// One row of the comparison table. Failed cells carry `error` instead of a loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub algorithm: String,
    pub hyperparameter: String,
    pub planning: bool,
    pub seed: u64,
    pub rounds: usize,
    pub pvl: Option<f64>,
    pub majority_loss: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Runs every cell, in parallel when the `parallel` feature is on.
pub fn compare_algorithms(cells: &[ExperimentConfig]) -> Vec<CellResult> {
    compare_with(cells, Mapper::Parallel)
}

/// Same as [`compare_algorithms`] on the calling thread only.
pub fn compare_algorithms_sequential(cells: &[ExperimentConfig]) -> Vec<CellResult> {
    compare_with(cells, Mapper::Sequential)
}

#[derive(Clone, Copy)]
enum Mapper {
    Parallel,
    Sequential,
}

impl Mapper {
    fn map<T: Sync, R: Send>(self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        match self {
            Mapper::Parallel => par::map(items, f),
            Mapper::Sequential => par::map_sequential(items, f),
        }
    }
}

type Loaded = std::result::Result<Arc<DatasetBundle>, String>;

fn compare_with(cells: &[ExperimentConfig], mapper: Mapper) -> Vec<CellResult> {
    // cells that would load identical data share one bundle
    let key = |c: &ExperimentConfig| {
        serde_json::to_string(&(&c.dataset, c.run.seed, &c.hierarchy, c.feature_mode))
            .expect("serializable")
    };
    let mut unique: BTreeMap<String, usize> = BTreeMap::new();
    let mut firsts: Vec<&ExperimentConfig> = Vec::new();
    let slot: Vec<usize> = cells
        .iter()
        .map(|c| {
            *unique.entry(key(c)).or_insert_with(|| {
                firsts.push(c);
                firsts.len() - 1
            })
        })
        .collect();
    let bundles: Vec<Loaded> = mapper.map(&firsts, |c| {
        c.load_dataset().map(Arc::new).map_err(|e| e.to_string())
    });

    let jobs: Vec<(usize, &ExperimentConfig)> = cells.iter().enumerate().collect();
    mapper.map(&jobs, |&(i, cfg)| {
        let mut row = CellResult {
            dataset: cfg.dataset.label(),
            algorithm: cfg.run.algorithm.name().into(),
            hyperparameter: cfg.run.algorithm.hyperparameter(),
            planning: cfg.run.planning,
            seed: cfg.run.seed,
            rounds: 0,
            pvl: None,
            majority_loss: None,
            seconds: 0.0,
            error: None,
        };
        let outcome = bundles[slot[i]]
            .clone()
            .and_then(|b| run_on_bundle(cfg, &b).map_err(|e| e.to_string()));
        match outcome {
            Ok(r) => {
                row.rounds = r.records.len();
                row.pvl = Some(r.final_pvl);
                row.majority_loss = Some(r.majority_loss);
                row.seconds = r.seconds;
            }
            Err(e) => row.error = Some(e),
        }
        row
    })
}

/// Lowest-loss row per (dataset, algorithm, planning): the best hyperparameter.
pub fn best_per_algorithm(rows: &[CellResult]) -> Vec<CellResult> {
    let mut best: BTreeMap<(String, String, bool), CellResult> = BTreeMap::new();
    for r in rows {
        let Some(pvl) = r.pvl else { continue };
        let k = (r.dataset.clone(), r.algorithm.clone(), r.planning);
        match best.get(&k) {
            Some(b) if b.pvl.is_some_and(|bp| bp <= pvl) => {}
            _ => {
                best.insert(k, r.clone());
            }
        }
    }
    best.into_values().collect()
}

/// Writes `table.csv`, `table.json` and `best.csv` into `dir`.
pub fn write_table(rows: &[CellResult], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_csv = |name: &str, rows: &[CellResult]| -> Result<()> {
        let path = dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write_csv("table.csv", rows)?;
    write_csv("best.csv", &best_per_algorithm(rows))?;
    let path = dir.join("table.json");
    std::fs::write(&path, serde_json::to_string_pretty(rows)?).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Reference;
    use crate::learners::Exploration;

    fn m1() -> DatasetSpec {
        DatasetSpec::Builtin {
            id: "m1".into(),
            seed: None,
            fraction: Some(0.25),
            shuffle: true,
        }
    }

    #[test]
    fn single_cell() {
        let cfg = ExperimentConfig::new(
            m1(),
            RunSettings::new(Algorithm::Reference(Reference::Supervised), 1),
        );
        let rows = compare_algorithms(&[cfg]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].rounds, 1400);
        assert!(rows[0].error.is_none());
    }

    #[test]
    fn identical_cells_identical_loss_and_failures_reported() {
        let algo = Algorithm::Bandit(Exploration::EpsilonGreedy { epsilon: 0.05 });
        let good = ExperimentConfig::new(m1(), RunSettings::new(algo, 3));
        let bad = ExperimentConfig::new(
            DatasetSpec::Builtin {
                id: "nope".into(),
                seed: None,
                fraction: None,
                shuffle: true,
            },
            RunSettings::new(algo, 3),
        );
        let rows = compare_algorithms(&[good.clone(), bad, good.clone()]);
        assert_eq!(rows[0].pvl, rows[2].pvl);
        assert!(rows[1].error.is_some() && rows[1].pvl.is_none());
        let seq = compare_algorithms_sequential(&[good]);
        assert_eq!(seq[0].pvl, rows[0].pvl);
    }

    #[test]
    fn grid_expands_and_best_picks_minimum() {
        let m = Matrix {
            cells: vec![],
            grid: Some(Grid {
                datasets: vec![m1()],
                algorithms: vec![
                    Algorithm::Bandit(Exploration::Bagging { bags: 2 }),
                    Algorithm::Bandit(Exploration::Bagging { bags: 4 }),
                ],
                seeds: vec![0, 1],
                planning: false,
                warmstart: None,
                hierarchy: None,
                feedback: FeedbackConfig::default(),
            }),
        };
        let cells = m.expand();
        assert_eq!(cells.len(), 4);
        let rows = compare_algorithms(&cells);
        let best = best_per_algorithm(&rows);
        assert_eq!(best.len(), 1);
        let min = rows
            .iter()
            .filter_map(|r| r.pvl)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best[0].pvl, Some(min));

        let dir = tempfile::tempdir().unwrap();
        write_table(&rows, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
    }
}
