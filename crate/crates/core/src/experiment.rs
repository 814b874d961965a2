//! The active learning cycle: initial random labels, then per cycle
//! train -> evaluate -> query -> annotate -> update pools, repeated over
//! strategies and repetitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split_pool_test, DatasetError, EmbeddingDataset, Split, SplitSpec};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, MetricError, MetricRecord};
use crate::model::{predict_probs, train_head, ModelError, TrainConfig};
use crate::rng::{derive_rng, derive_seed, Purpose, StreamKey};
use crate::strategies::{QueryContext, Strategy, StrategyError};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("PoolExhausted: budget needs {needed} pool instances but the pool has {available}")]
    PoolExhausted { needed: usize, available: usize },
    #[error("IndexNotInPool: instance {0} is not in the unlabeled pool")]
    IndexNotInPool(usize),
    #[error("BaselineMissing: baseline strategy {0:?} has no rows")]
    BaselineMissing(String),
}

/// Full description of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub split: SplitSpec,
    pub strategies: Vec<Strategy>,
    pub initial_size: usize,
    pub batch_b: usize,
    pub num_cycles: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub train: TrainConfig,
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            split: SplitSpec::new([1, 2, 3], [4, 5]),
            strategies: Strategy::ALL.to_vec(),
            initial_size: 10,
            batch_b: 10,
            num_cycles: 50,
            repetitions: 10,
            master_seed: 0,
            train: TrainConfig::default(),
            normalize: false,
        }
    }
}

impl ExperimentConfig {
    /// Labels acquired by the end of a run: `initial_size + num_cycles * batch_b`.
    pub fn budget(&self) -> usize {
        self.initial_size + self.num_cycles * self.batch_b
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |msg: &str| Err(LoopError::InvalidConfig(msg.to_owned()));
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.strategies.iter().collect::<BTreeSet<_>>().len() != self.strategies.len() {
            return bad("strategies must not repeat");
        }
        if self.initial_size == 0 {
            return bad("initial_size must be >= 1");
        }
        if self.batch_b == 0 {
            return bad("batch_b must be >= 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1");
        }
        self.split.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

/// Unlabeled and labeled index sets at one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    unlabeled: Vec<usize>,
    labeled: Vec<usize>,
    cycle: usize,
}

impl PoolState {
    /// Starts from `pool` with the `initial` indices already labeled.
    pub fn new(pool: &[usize], initial: &[usize]) -> Result<Self, LoopError> {
        let initial: BTreeSet<usize> = initial.iter().copied().collect();
        let pool_set: BTreeSet<usize> = pool.iter().copied().collect();
        if let Some(&i) = initial.difference(&pool_set).next() {
            return Err(LoopError::IndexNotInPool(i));
        }
        Ok(Self {
            unlabeled: pool_set.difference(&initial).copied().collect(),
            labeled: initial.into_iter().collect(),
            cycle: 0,
        })
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn contains_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.binary_search(&index).is_ok()
    }

    /// Moves an annotated batch from the unlabeled to the labeled set and
    /// advances the cycle counter.
    pub fn apply(&mut self, batch: &[Annotated]) -> Result<(), LoopError> {
        let mut moved = BTreeSet::new();
        for a in batch {
            if !self.contains_unlabeled(a.index) || !moved.insert(a.index) {
                return Err(LoopError::IndexNotInPool(a.index));
            }
        }
        self.unlabeled.retain(|i| !moved.contains(i));
        self.labeled.extend(moved);
        self.labeled.sort_unstable();
        self.cycle += 1;
        Ok(())
    }
}

/// One instance paired with its ground-truth label row.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotated {
    pub index: usize,
    pub embedding: Vec<f32>,
    pub labels: Vec<u8>,
}

/// Replays ground-truth labels for a batch of dataset indices, which must
/// all still be unlabeled.
pub fn simulate_annotation(
    ds: &EmbeddingDataset,
    state: &PoolState,
    batch: &[usize],
) -> Result<Vec<Annotated>, LoopError> {
    batch
        .iter()
        .map(|&index| {
            if !state.contains_unlabeled(index) {
                return Err(LoopError::IndexNotInPool(index));
            }
            Ok(Annotated {
                index,
                embedding: ds.embeddings().row(index).to_vec(),
                labels: ds.labels().row(index).to_vec(),
            })
        })
        .collect()
}

/// One point on a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub strategy: Strategy,
    pub repetition: usize,
    pub cycle: usize,
    pub labeled_count: usize,
    pub metrics: MetricRecord,
}

/// Learning-curve rows, ordered by (strategy, repetition, cycle).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

/// Rows of one (strategy, repetition) run plus the dataset indices queried at
/// each cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub rows: Vec<CurveRow>,
    pub initial: Vec<usize>,
    pub queried: Vec<Vec<usize>>,
}

/// A dataset prepared for repeated runs under one configuration.
pub struct Experiment<'a> {
    ds: &'a EmbeddingDataset,
    cfg: ExperimentConfig,
    features: Matrix<f64>,
    split: Split,
    test_x: Matrix<f64>,
    test_y: Matrix<u8>,
}

impl<'a> Experiment<'a> {
    pub fn new(ds: &'a EmbeddingDataset, cfg: ExperimentConfig) -> Result<Self, LoopError> {
        cfg.validate()?;
        let split = split_pool_test(ds, &cfg.split)?;
        if cfg.budget() > split.pool.len() {
            return Err(LoopError::PoolExhausted {
                needed: cfg.budget(),
                available: split.pool.len(),
            });
        }
        let features = ds.features(cfg.normalize);
        let test_x = features.select_rows(&split.test);
        let test_y = ds.labels().select_rows(&split.test);
        Ok(Self {
            ds,
            cfg,
            features,
            split,
            test_x,
            test_y,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    /// The initial labeled set of a repetition; shared by all strategies.
    pub fn initial_set(&self, repetition: usize) -> Vec<usize> {
        let mut rng = derive_rng(
            self.cfg.master_seed,
            StreamKey {
                strategy: None,
                repetition: repetition as u64,
                cycle: 0,
                purpose: Purpose::InitialSet,
            },
        );
        let mut picked: Vec<usize> = index::sample(&mut rng, self.split.pool.len(), self.cfg.initial_size)
            .into_iter()
            .map(|p| self.split.pool[p])
            .collect();
        picked.sort_unstable();
        picked
    }

    /// Seed of the head trained at `cycle` of `repetition`; shared by all strategies.
    pub fn train_seed(&self, repetition: usize, cycle: usize) -> u64 {
        derive_seed(
            self.cfg.master_seed,
            StreamKey {
                strategy: None,
                repetition: repetition as u64,
                cycle: cycle as u64,
                purpose: Purpose::Train,
            },
        )
    }

    /// Runs one strategy for one repetition: `num_cycles + 1` evaluations.
    pub fn run_single(&self, strategy: Strategy, repetition: usize) -> Result<RunOutcome, LoopError> {
        let cfg = &self.cfg;
        let initial = self.initial_set(repetition);
        let mut state = PoolState::new(&self.split.pool, &initial)?;
        let mut rows = Vec::with_capacity(cfg.num_cycles + 1);
        let mut queried = Vec::with_capacity(cfg.num_cycles);

        for cycle in 0..=cfg.num_cycles {
            let head = train_head(
                &self.features,
                self.ds.labels(),
                state.labeled(),
                &cfg.train,
                self.train_seed(repetition, cycle),
            )?;
            let metrics = evaluate(&predict_probs(&head, &self.test_x)?, &self.test_y)?;
            rows.push(CurveRow {
                strategy,
                repetition,
                cycle,
                labeled_count: state.labeled().len(),
                metrics,
            });
            if cycle == cfg.num_cycles {
                break;
            }

            if state.unlabeled().len() < cfg.batch_b {
                return Err(LoopError::PoolExhausted {
                    needed: cfg.batch_b,
                    available: state.unlabeled().len(),
                });
            }
            let pool_x = self.features.select_rows(state.unlabeled());
            let pool_probs = predict_probs(&head, &pool_x)?;
            let labeled_x = self.features.select_rows(state.labeled());
            let mut rng = derive_rng(
                cfg.master_seed,
                StreamKey {
                    strategy: Some(strategy.name()),
                    repetition: repetition as u64,
                    cycle: cycle as u64,
                    purpose: Purpose::Query,
                },
            );
            let mut ctx = QueryContext {
                pool_embeddings: &pool_x,
                pool_probs: &pool_probs,
                labeled_embeddings: &labeled_x,
                b: cfg.batch_b,
                rng: &mut rng,
            };
            let batch: Vec<usize> = strategy
                .query(&mut ctx)?
                .into_vec()
                .into_iter()
                .map(|p| state.unlabeled()[p])
                .collect();
            let annotated = simulate_annotation(self.ds, &state, &batch)?;
            state.apply(&annotated)?;
            queried.push(batch);
        }
        Ok(RunOutcome { rows, initial, queried })
    }

    /// Runs every configured strategy and repetition. With `jobs > 1` (and
    /// the `parallel` feature) runs execute concurrently; the result does not
    /// depend on `jobs`.
    pub fn run(&self, jobs: usize) -> Result<LearningCurve, LoopError> {
        let tasks: Vec<(usize, Strategy, usize)> = self
            .cfg
            .strategies
            .iter()
            .enumerate()
            .flat_map(|(si, &s)| (0..self.cfg.repetitions).map(move |r| (si, s, r)))
            .collect();
        let outcomes = self.run_tasks(&tasks, jobs)?;
        let mut keyed: Vec<((usize, usize), Vec<CurveRow>)> = tasks
            .iter()
            .zip(outcomes)
            .map(|(&(si, _, r), o)| ((si, r), o.rows))
            .collect();
        keyed.sort_by_key(|(k, _)| *k);
        Ok(LearningCurve {
            rows: keyed.into_iter().flat_map(|(_, rows)| rows).collect(),
        })
    }

    #[cfg(feature = "parallel")]
    fn run_tasks(&self, tasks: &[(usize, Strategy, usize)], jobs: usize) -> Result<Vec<RunOutcome>, LoopError> {
        use rayon::prelude::*;
        if jobs <= 1 {
            return tasks.iter().map(|&(_, s, r)| self.run_single(s, r)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| LoopError::InvalidConfig(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| tasks.par_iter().map(|&(_, s, r)| self.run_single(s, r)).collect())
    }

    #[cfg(not(feature = "parallel"))]
    fn run_tasks(&self, tasks: &[(usize, Strategy, usize)], _jobs: usize) -> Result<Vec<RunOutcome>, LoopError> {
        tasks.iter().map(|&(_, s, r)| self.run_single(s, r)).collect()
    }
}

/// Convenience wrapper: prepares the experiment and runs it.
pub fn run_experiment(ds: &EmbeddingDataset, cfg: &ExperimentConfig, jobs: usize) -> Result<LearningCurve, LoopError> {
    Experiment::new(ds, cfg.clone())?.run(jobs)
}

/// Metrics reported on learning and improvement curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Cmap,
    Auroc,
    T1Acc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Cmap, Metric::Auroc, Metric::T1Acc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cmap => "cmap",
            Metric::Auroc => "auroc",
            Metric::T1Acc => "t1acc",
        }
    }

    pub fn of(self, r: &MetricRecord) -> f64 {
        match self {
            Metric::Cmap => r.cmap,
            Metric::Auroc => r.auroc,
            Metric::T1Acc => r.t1acc,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}; expected cmap, auroc or t1acc"))
    }
}

/// Difference of repetition-averaged metrics between a strategy and the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub strategy: Strategy,
    pub metric: Metric,
    pub cycle: usize,
    pub labeled_count: usize,
    pub abs_delta: f64,
    /// `100 * abs_delta / baseline_mean`; absent when the baseline mean is zero.
    pub rel_percent: Option<f64>,
}

/// Per-cycle improvement of every non-baseline strategy over `baseline`.
///
/// Means are taken over the repetitions both strategies share at that cycle.
/// Rows come out ordered by strategy (first appearance), metric, cycle.
pub fn improvement_curves(curve: &LearningCurve, baseline: Strategy) -> Result<Vec<ImprovementRow>, LoopError> {
    let mut order: Vec<Strategy> = Vec::new();
    // (strategy, cycle) -> repetition -> row
    let mut table: BTreeMap<(Strategy, usize), BTreeMap<usize, &CurveRow>> = BTreeMap::new();
    for row in &curve.rows {
        if !order.contains(&row.strategy) {
            order.push(row.strategy);
        }
        table
            .entry((row.strategy, row.cycle))
            .or_default()
            .insert(row.repetition, row);
    }
    if !order.contains(&baseline) {
        return Err(LoopError::BaselineMissing(baseline.name().to_owned()));
    }

    let mut out = Vec::new();
    for &strategy in order.iter().filter(|&&s| s != baseline) {
        let cycles: Vec<usize> = table.keys().filter(|(s, _)| *s == strategy).map(|&(_, c)| c).collect();
        for metric in Metric::ALL {
            for &cycle in &cycles {
                let (Some(ours), Some(base)) = (table.get(&(strategy, cycle)), table.get(&(baseline, cycle))) else {
                    continue;
                };
                let shared: Vec<usize> = ours.keys().filter(|r| base.contains_key(r)).copied().collect();
                if shared.is_empty() {
                    continue;
                }
                let mean = |rows: &BTreeMap<usize, &CurveRow>| {
                    shared.iter().map(|r| metric.of(&rows[r].metrics)).sum::<f64>() / shared.len() as f64
                };
                let (ours_mean, base_mean) = (mean(ours), mean(base));
                let abs_delta = ours_mean - base_mean;
                out.push(ImprovementRow {
                    strategy,
                    metric,
                    cycle,
                    labeled_count: base[&shared[0]].labeled_count,
                    abs_delta,
                    rel_percent: (base_mean != 0.0).then(|| 100.0 * abs_delta / base_mean),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(v: f64) -> MetricRecord {
        MetricRecord {
            cmap: v,
            auroc: v,
            t1acc: v,
            evaluated_instances: 1,
            skipped_classes: 0,
        }
    }

    fn row(strategy: Strategy, repetition: usize, cycle: usize, v: f64) -> CurveRow {
        CurveRow {
            strategy,
            repetition,
            cycle,
            labeled_count: 10 + 10 * cycle,
            metrics: record(v),
        }
    }

    #[test]
    fn pool_state_updates() {
        let mut s = PoolState::new(&[2, 4, 6, 8], &[4]).unwrap();
        assert_eq!(s.unlabeled(), &[2, 6, 8]);
        let batch = vec![Annotated {
            index: 8,
            embedding: vec![],
            labels: vec![],
        }];
        s.apply(&batch).unwrap();
        assert_eq!((s.labeled(), s.unlabeled(), s.cycle()), (&[4, 8][..], &[2, 6][..], 1));
        assert!(matches!(s.apply(&batch), Err(LoopError::IndexNotInPool(8))));
        assert!(matches!(
            PoolState::new(&[1, 2], &[3]),
            Err(LoopError::IndexNotInPool(3))
        ));
    }

    #[test]
    fn improvement_arithmetic() {
        let curve = LearningCurve {
            rows: vec![row(Strategy::Random, 0, 0, 0.40), row(Strategy::Entropy, 0, 0, 0.46)],
        };
        let imp = improvement_curves(&curve, Strategy::Random).unwrap();
        assert_eq!(imp.len(), 3);
        assert!((imp[0].abs_delta - 0.06).abs() < 1e-12);
        assert!((imp[0].rel_percent.unwrap() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn self_comparison_is_zero_and_zero_baseline_has_no_percent() {
        let curve = LearningCurve {
            rows: vec![
                row(Strategy::Random, 0, 0, 0.0),
                row(Strategy::Random, 1, 0, 0.0),
                row(Strategy::Badge, 0, 0, 0.0),
                row(Strategy::Badge, 1, 0, 0.0),
            ],
        };
        let imp = improvement_curves(&curve, Strategy::Random).unwrap();
        assert!(imp.iter().all(|r| r.abs_delta == 0.0 && r.rel_percent.is_none()));
        assert!(matches!(
            improvement_curves(&curve, Strategy::Entropy),
            Err(LoopError::BaselineMissing(_))
        ));
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.budget(), 510);
        cfg.strategies = vec![Strategy::Random, Strategy::Random];
        assert!(cfg.validate().is_err());
        cfg.strategies = vec![];
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            repetitions: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
