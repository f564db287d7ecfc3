//! The active-learning loop: train, select, query the oracle, update pools,
//! evaluate.
//!
//! [`ActiveLearner`] is a stepwise state machine — [`prepare_query`] picks
//! the next batch, [`submit`] applies its labels, retrains and evaluates —
//! so a human oracle can answer asynchronously and the state can be
//! checkpointed while a batch is pending. [`run`] drives it with any
//! [`Oracle`].
//!
//! Round 0 labels a uniformly random seed set (identical for every strategy
//! under the same seed); rounds `1..=T` each add one selected batch.
//!
//! [`prepare_query`]: ActiveLearner::prepare_query
//! [`submit`]: ActiveLearner::submit

mod metrics;
mod oracle;

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifier::{train, Classifier, TrainConfig};
use crate::dataset::{Dataset, GroupId, Pools, TestSet};
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::{self, random_subset, SelectionRequest, Strategy};

pub use metrics::{confusion, evaluate, ClassMetrics, ConfusionMatrix, Metrics};
pub use oracle::{check_labels, ChannelOracle, Oracle, QueryBatch, SimulatedOracle};

const TAG_INITIAL: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_SELECT: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Simulated,
    Human,
}

/// Loop configuration. `train.seed` is ignored: each round trains from a
/// seed derived from `seed` and the round number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ALConfig {
    pub rounds: usize,
    pub batch_size: usize,
    pub candidates: usize,
    pub strategy: Strategy,
    /// Seed-set size; defaults to `batch_size`.
    pub initial: Option<usize>,
    pub train: TrainConfig,
    pub seed: u64,
    pub oracle: OracleMode,
    /// Human-oracle patience per batch; `None` waits forever.
    pub oracle_timeout_s: Option<f64>,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            rounds: 6,
            batch_size: 10,
            candidates: 30,
            strategy: Strategy::Duis,
            initial: None,
            train: TrainConfig::default(),
            seed: 0,
            oracle: OracleMode::Simulated,
            oracle_timeout_s: None,
        }
    }
}

impl ALConfig {
    pub fn initial_count(&self) -> usize {
        self.initial.unwrap_or(self.batch_size)
    }

    pub fn oracle_timeout(&self) -> Option<Duration> {
        self.oracle_timeout_s.map(Duration::from_secs_f64)
    }

    /// Labels consumed by the full run.
    pub fn budget(&self) -> usize {
        self.initial_count() + self.rounds * self.batch_size
    }

    /// Checks the configuration against a training pool of `pool_size`
    /// groups.
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.rounds == 0 || self.batch_size == 0 || self.initial_count() == 0 {
            return Err(Error::InvalidRequest(
                "rounds, batch_size and initial must be at least 1".into(),
            ));
        }
        self.train.validate()?;
        if let Some(t) = self.oracle_timeout_s {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidRequest("oracle_timeout_s must be positive".into()));
            }
        }
        if self.budget() > pool_size {
            return Err(Error::BudgetInfeasible {
                needed: self.budget(),
                available: pool_size,
            });
        }
        if self.strategy == Strategy::Duis {
            if self.candidates < self.batch_size {
                return Err(Error::InvalidRequest(format!(
                    "candidates ({}) must be at least batch_size ({})",
                    self.candidates, self.batch_size
                )));
            }
            // The last selection sees the smallest unlabeled pool.
            let needed = self.initial_count() + (self.rounds - 1) * self.batch_size + self.candidates;
            if needed > pool_size {
                return Err(Error::BudgetInfeasible {
                    needed,
                    available: pool_size,
                });
            }
        }
        Ok(())
    }

    fn train_config(&self, round: usize) -> TrainConfig {
        TrainConfig {
            seed: rng::derive_seed(self.seed, &[TAG_TRAIN, round as u64]),
            ..self.train.clone()
        }
    }
}

/// Metrics after one round, plus the audit trail of what was labeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: usize,
    pub labeled_count: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Seconds from batch selection to evaluation, including oracle time.
    pub wall_time: f64,
    pub selected: Vec<GroupId>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub seed: u64,
    pub config: ALConfig,
    /// Round 0: the random seed set.
    pub initial: Option<RoundEntry>,
    /// Rounds `1..=T`.
    pub rounds: Vec<RoundEntry>,
}

impl RunRecord {
    pub fn new(config: &ALConfig) -> Self {
        Self {
            strategy: config.strategy,
            seed: config.seed,
            config: config.clone(),
            initial: None,
            rounds: Vec::new(),
        }
    }

    /// Round 0 followed by the selection rounds.
    pub fn entries(&self) -> impl Iterator<Item = &RoundEntry> {
        self.initial.iter().chain(&self.rounds)
    }

    pub fn final_entry(&self) -> Option<&RoundEntry> {
        self.entries().last()
    }

    /// Trapezoidal area under accuracy vs. labeled count, divided by the
    /// labeled-count span (a mean accuracy in percent).
    pub fn area_under_curve(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .entries()
            .map(|e| (e.labeled_count as f64, e.metrics.accuracy))
            .collect();
        let span = pts.last()?.0 - pts.first()?.0;
        if span <= 0.0 {
            return Some(pts[0].1);
        }
        let area: f64 = pts
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        Some(area / span)
    }
}

/// Snapshot sufficient to resume a learner: everything except the model,
/// which is retrained deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerCheckpoint {
    pub record: RunRecord,
    pub pending: Option<Vec<GroupId>>,
}

#[derive(Debug)]
pub struct ActiveLearner {
    config: ALConfig,
    pools: Pools,
    test: TestSet,
    model: Option<Classifier>,
    record: RunRecord,
    pending: Option<Vec<GroupId>>,
    clock: Option<Instant>,
}

impl ActiveLearner {
    pub fn new(config: ALConfig, dataset: Dataset) -> Result<Self> {
        let Dataset { pools, test } = dataset;
        if !pools.labeled_ids().is_empty() {
            return Err(Error::InvalidRequest("pools must start fully unlabeled".into()));
        }
        config.validate(pools.len())?;
        if test.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let learner = Self {
            record: RunRecord::new(&config),
            config,
            pools,
            test,
            model: None,
            pending: None,
            clock: None,
        };
        learner.check_no_leakage()?;
        Ok(learner)
    }

    /// Rebuilds a learner from a checkpoint over the same dataset.
    pub fn restore(checkpoint: LearnerCheckpoint, dataset: Dataset) -> Result<Self> {
        let mut learner = Self::new(checkpoint.record.config.clone(), dataset)?;
        for e in checkpoint.record.entries() {
            check_labels(&e.selected, &e.labels, learner.pools.class_count())?;
            learner.pools.move_to_labeled(&e.selected, &e.labels)?;
        }
        if let Some(last) = checkpoint.record.final_entry() {
            let (model, _) = train(&learner.pools, &learner.config.train_config(last.round))?;
            learner.model = Some(model);
        }
        if let Some(ids) = &checkpoint.pending {
            if let Some(id) = ids.iter().find(|id| !learner.pools.unlabeled_ids().contains(*id)) {
                return Err(Error::UnknownGroup(id.to_string()));
            }
        }
        learner.record = checkpoint.record;
        learner.pending = checkpoint.pending;
        Ok(learner)
    }

    pub fn checkpoint(&self) -> LearnerCheckpoint {
        LearnerCheckpoint {
            record: self.record.clone(),
            pending: self.pending.clone(),
        }
    }

    pub fn config(&self) -> &ALConfig {
        &self.config
    }

    pub fn pools(&self) -> &Pools {
        &self.pools
    }

    pub fn test_set(&self) -> &TestSet {
        &self.test
    }

    pub fn model(&self) -> Option<&Classifier> {
        self.model.as_ref()
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn pending(&self) -> Option<&[GroupId]> {
        self.pending.as_deref()
    }

    /// Index of the round whose batch is pending or comes next.
    pub fn round(&self) -> usize {
        self.record.entries().count()
    }

    pub fn is_finished(&self) -> bool {
        self.record.rounds.len() >= self.config.rounds
    }

    /// Chooses the next batch (or returns the one already pending). `None`
    /// once all rounds are done.
    pub fn prepare_query(&mut self) -> Result<Option<&[GroupId]>> {
        if self.is_finished() {
            return Ok(None);
        }
        if self.pending.is_none() {
            self.clock = Some(Instant::now());
            let round = self.round();
            let ids = match &self.model {
                None => random_subset(
                    self.pools.unlabeled_ids(),
                    self.config.initial_count(),
                    &mut rng::stream(self.config.seed, &[TAG_INITIAL]),
                ),
                Some(model) => {
                    sampling::select(&SelectionRequest {
                        model,
                        pools: &self.pools,
                        batch: self.config.batch_size,
                        candidates: self.config.candidates,
                        strategy: self.config.strategy,
                        seed: rng::derive_seed(self.config.seed, &[TAG_SELECT, round as u64]),
                    })?
                    .ids
                }
            };
            self.pending = Some(ids);
        }
        Ok(self.pending.as_deref())
    }

    /// Labels the pending batch, retrains from scratch and evaluates.
    pub fn submit(&mut self, labels: &[usize]) -> Result<&RoundEntry> {
        let ids = self
            .pending
            .clone()
            .ok_or_else(|| Error::InvalidRequest("no batch is awaiting labels".into()))?;
        check_labels(&ids, labels, self.pools.class_count())?;
        self.pools.move_to_labeled(&ids, labels)?;
        self.pending = None;
        let round = self.round();
        let (model, _) = train(&self.pools, &self.config.train_config(round))?;
        let metrics = evaluate(&model, &self.test)?;
        self.model = Some(model);
        self.check_no_leakage()?;
        let entry = RoundEntry {
            round,
            labeled_count: self.pools.labeled_ids().len(),
            metrics,
            wall_time: self.clock.take().map_or(0.0, |t| t.elapsed().as_secs_f64()),
            selected: ids,
            labels: labels.to_vec(),
        };
        if round == 0 {
            self.record.initial = Some(entry);
            Ok(self.record.initial.as_ref().expect("just set"))
        } else {
            self.record.rounds.push(entry);
            Ok(self.record.rounds.last().expect("just pushed"))
        }
    }

    fn check_no_leakage(&self) -> Result<()> {
        match self.test.items.iter().find(|t| self.pools.group(&t.id).is_some()) {
            Some(t) => Err(Error::InvalidRequest(format!("test item {} is also in the pools", t.id))),
            None => Ok(()),
        }
    }
}

/// Runs the full loop, calling `on_round` after every evaluated round.
pub fn run_with(
    config: ALConfig,
    dataset: Dataset,
    oracle: &mut dyn Oracle,
    mut on_round: impl FnMut(&RoundEntry),
) -> Result<RunRecord> {
    let mut learner = ActiveLearner::new(config, dataset)?;
    while let Some(ids) = learner.prepare_query()? {
        let ids = ids.to_vec();
        let labels = oracle.label(learner.pools(), &ids)?;
        on_round(learner.submit(&labels)?);
    }
    Ok(learner.record)
}

pub fn run(config: ALConfig, dataset: Dataset, oracle: &mut dyn Oracle) -> Result<RunRecord> {
    run_with(config, dataset, oracle, |_| {})
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    round: usize,
    labeled_count: usize,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    strategy: &'a str,
    seed: u64,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// `round,labeled_count,accuracy,precision,recall,f1,strategy,seed`.
pub fn write_metrics_csv<W: Write>(out: W, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(out);
    let mut any = false;
    for e in record.entries() {
        any = true;
        w.serialize(MetricsRow {
            round: e.round,
            labeled_count: e.labeled_count,
            accuracy: e.metrics.accuracy,
            precision: e.metrics.precision,
            recall: e.metrics.recall,
            f1: e.metrics.f1,
            strategy: record.strategy.name(),
            seed: record.seed,
        })
        .map_err(sampling::csv_error)?;
    }
    if !any {
        w.write_record(["round", "labeled_count", "accuracy", "precision", "recall", "f1", "strategy", "seed"])
            .map_err(sampling::csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation per round across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub round: usize,
    pub labeled_count: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub strategy: String,
    pub runs: usize,
}

/// `(mean, sample std)`; the std of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(records: &[RunRecord]) -> Result<Vec<AggregateRow>> {
    let first = records.first().ok_or(Error::Empty("run records"))?;
    let per_run: Vec<Vec<&RoundEntry>> = records.iter().map(|r| r.entries().collect()).collect();
    let rounds = per_run[0].len();
    for (r, entries) in records.iter().zip(&per_run) {
        let aligned = entries.len() == rounds
            && entries
                .iter()
                .zip(&per_run[0])
                .all(|(a, b)| a.round == b.round && a.labeled_count == b.labeled_count);
        if !aligned || r.strategy != first.strategy {
            return Err(Error::InvalidRequest(
                "records to aggregate must share strategy, rounds and labeled counts".into(),
            ));
        }
    }
    Ok((0..rounds)
        .map(|i| {
            let stat = |f: fn(&Metrics) -> f64| {
                mean_std(&per_run.iter().map(|e| f(&e[i].metrics)).collect::<Vec<_>>())
            };
            let (accuracy_mean, accuracy_std) = stat(|m| m.accuracy);
            let (precision_mean, precision_std) = stat(|m| m.precision);
            let (recall_mean, recall_std) = stat(|m| m.recall);
            let (f1_mean, f1_std) = stat(|m| m.f1);
            AggregateRow {
                round: per_run[0][i].round,
                labeled_count: per_run[0][i].labeled_count,
                accuracy_mean,
                accuracy_std,
                precision_mean,
                precision_std,
                recall_mean,
                recall_std,
                f1_mean,
                f1_std,
                strategy: first.strategy.name().to_string(),
                runs: records.len(),
            }
        })
        .collect())
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv_writer(out);
    for row in rows {
        w.serialize(row).map_err(sampling::csv_error)?;
    }
    w.flush()?;
    Ok(())
}
