//! One active-learning run driven by a background worker thread.
//!
//! The worker is the only writer of learner state. HTTP handlers read
//! snapshots and, while a batch awaits labels, record answers; the answer
//! that completes the batch flips the state to `training` under the lock,
//! so the round advances exactly once.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spadal::al::{write_metrics_csv, ALConfig, ActiveLearner, LearnerCheckpoint, OracleMode, Oracle, RunRecord, SimulatedOracle};
use spadal::dataset::{Dataset, GroupId};
use spadal::{Error, Result};

use crate::render::render_base64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Training,
    Selecting,
    AwaitingLabels,
    Finished,
    Failed,
}

/// A queried group as shown to annotators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryItem {
    pub group_id: GroupId,
    /// Base64 PNG of the observed image.
    pub observed: String,
    /// Base64 PNGs of the synthetic variants.
    pub variants: Vec<String>,
    pub submitted_label: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    pub labeled_count: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub state: SessionState,
    pub round: usize,
    pub labeled_count: usize,
    pub config: ALConfig,
    pub history: Vec<HistoryEntry>,
    pub pending: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAck {
    pub accepted: usize,
    pub remaining: usize,
    pub advanced: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub enum LabelError {
    WrongState(SessionState),
    UnknownGroup(GroupId),
    InvalidClass { group: GroupId, class: usize },
}

/// On-disk form of a session.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionFile {
    pub id: String,
    pub checkpoint: LearnerCheckpoint,
}

struct Inner {
    state: SessionState,
    pending: Vec<QueryItem>,
    checkpoint: LearnerCheckpoint,
    error: Option<String>,
    shutdown: bool,
}

pub struct Session {
    id: String,
    config: ALConfig,
    class_count: usize,
    file: Option<PathBuf>,
    inner: Mutex<Inner>,
    labels_ready: Condvar,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("id", &self.id).finish_non_exhaustive()
    }
}

impl Session {
    /// Validates `config` against `dataset` and starts the worker.
    pub fn start(id: String, config: ALConfig, dataset: Dataset, file: Option<PathBuf>) -> Result<Arc<Self>> {
        let learner = ActiveLearner::new(config, dataset)?;
        let session = Self::new(id, learner.checkpoint(), learner.pools().class_count(), file, SessionState::Selecting);
        session.persist()?;
        let worker = Arc::clone(&session);
        std::thread::spawn(move || worker.drive(learner));
        Ok(session)
    }

    /// Resumes a persisted session; the model is retrained in the worker.
    pub fn resume(saved: SessionFile, dataset: Dataset, file: Option<PathBuf>) -> Arc<Self> {
        let class_count = dataset.pools.class_count();
        let session = Self::new(saved.id, saved.checkpoint.clone(), class_count, file, SessionState::Training);
        let worker = Arc::clone(&session);
        std::thread::spawn(move || match ActiveLearner::restore(saved.checkpoint, dataset) {
            Ok(learner) => worker.drive(learner),
            Err(e) => worker.fail(e),
        });
        session
    }

    fn new(id: String, checkpoint: LearnerCheckpoint, class_count: usize, file: Option<PathBuf>, state: SessionState) -> Arc<Self> {
        Arc::new(Self {
            id,
            config: checkpoint.record.config.clone(),
            class_count,
            file,
            inner: Mutex::new(Inner {
                state,
                pending: Vec::new(),
                checkpoint,
                error: None,
                shutdown: false,
            }),
            labels_ready: Condvar::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &ALConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn state(&self) -> SessionState {
        self.lock().state
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.lock();
        let record = &inner.checkpoint.record;
        Snapshot {
            id: self.id.clone(),
            state: inner.state,
            round: record.entries().count(),
            labeled_count: record.final_entry().map_or(0, |e| e.labeled_count),
            config: self.config.clone(),
            history: record
                .entries()
                .map(|e| HistoryEntry {
                    round: e.round,
                    labeled_count: e.labeled_count,
                    accuracy: e.metrics.accuracy,
                    precision: e.metrics.precision,
                    recall: e.metrics.recall,
                    f1: e.metrics.f1,
                    wall_time: e.wall_time,
                })
                .collect(),
            pending: inner.pending.iter().filter(|q| q.submitted_label.is_none()).count(),
            error: inner.error.clone(),
        }
    }

    pub fn record(&self) -> RunRecord {
        self.lock().checkpoint.record.clone()
    }

    /// The batch awaiting labels; empty once the session has finished.
    pub fn queries(&self) -> std::result::Result<Vec<QueryItem>, SessionState> {
        let inner = self.lock();
        match inner.state {
            SessionState::AwaitingLabels => Ok(inner.pending.clone()),
            SessionState::Finished => Ok(Vec::new()),
            other => Err(other),
        }
    }

    /// Records answers for pending groups. All-or-nothing: one bad entry
    /// rejects the whole submission. Resubmission overwrites.
    pub fn submit_labels(&self, labels: &BTreeMap<GroupId, usize>) -> std::result::Result<LabelAck, LabelError> {
        let mut inner = self.lock();
        if inner.state != SessionState::AwaitingLabels {
            return Err(LabelError::WrongState(inner.state));
        }
        for (id, &class) in labels {
            if !inner.pending.iter().any(|q| &q.group_id == id) {
                return Err(LabelError::UnknownGroup(id.clone()));
            }
            if class >= self.class_count {
                return Err(LabelError::InvalidClass { group: id.clone(), class });
            }
        }
        for item in inner.pending.iter_mut() {
            if let Some(&class) = labels.get(&item.group_id) {
                item.submitted_label = Some(class);
            }
        }
        let remaining = inner.pending.iter().filter(|q| q.submitted_label.is_none()).count();
        let advanced = remaining == 0;
        if advanced {
            inner.state = SessionState::Training;
            self.labels_ready.notify_all();
        }
        Ok(LabelAck {
            accepted: labels.len(),
            remaining,
            advanced,
        })
    }

    pub fn metrics_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &self.lock().checkpoint.record).expect("writing to memory");
        out
    }

    /// Persists the latest checkpoint and releases a worker blocked on labels.
    pub fn shutdown(&self) -> Result<()> {
        self.lock().shutdown = true;
        self.labels_ready.notify_all();
        self.persist()
    }

    fn persist(&self) -> Result<()> {
        let Some(path) = &self.file else { return Ok(()) };
        let saved = SessionFile {
            id: self.id.clone(),
            checkpoint: self.lock().checkpoint.clone(),
        };
        write_atomic(path, &serde_json::to_vec_pretty(&saved)?)
    }

    fn set_state(&self, state: SessionState) {
        self.lock().state = state;
    }

    fn fail(&self, e: Error) {
        tracing::warn!(session = %self.id, "session failed: {e}");
        let mut inner = self.lock();
        inner.state = SessionState::Failed;
        inner.error = Some(e.to_string());
    }

    fn drive(self: Arc<Self>, mut learner: ActiveLearner) {
        if let Err(e) = self.run(&mut learner) {
            self.fail(e);
        }
    }

    fn run(&self, learner: &mut ActiveLearner) -> Result<()> {
        loop {
            self.set_state(SessionState::Selecting);
            let Some(ids) = learner.prepare_query()? else {
                let mut inner = self.lock();
                inner.state = SessionState::Finished;
                inner.checkpoint = learner.checkpoint();
                drop(inner);
                return self.persist();
            };
            let ids = ids.to_vec();
            let labels = match self.config.oracle {
                OracleMode::Simulated => SimulatedOracle.label(learner.pools(), &ids)?,
                OracleMode::Human => {
                    let items = ids
                        .iter()
                        .map(|id| {
                            let g = learner.pools().group(id).expect("queried ids are pool members");
                            QueryItem {
                                group_id: id.clone(),
                                observed: render_base64(&g.observed),
                                variants: g.variants.iter().map(render_base64).collect(),
                                submitted_label: None,
                            }
                        })
                        .collect();
                    {
                        let mut inner = self.lock();
                        inner.pending = items;
                        inner.checkpoint = learner.checkpoint();
                    }
                    // the batch is on disk before anyone can answer it
                    self.persist()?;
                    self.set_state(SessionState::AwaitingLabels);
                    match self.wait_for_labels(&ids)? {
                        Some(labels) => labels,
                        None => return Ok(()),
                    }
                }
            };
            self.set_state(SessionState::Training);
            learner.submit(&labels)?;
            {
                let mut inner = self.lock();
                inner.pending.clear();
                inner.checkpoint = learner.checkpoint();
            }
            self.persist()?;
        }
    }

    /// Blocks until every pending item is labeled. `None` on shutdown.
    fn wait_for_labels(&self, ids: &[GroupId]) -> Result<Option<Vec<usize>>> {
        let deadline = self.config.oracle_timeout().map(|t| Instant::now() + t);
        let mut inner = self.lock();
        while inner.state == SessionState::AwaitingLabels && !inner.shutdown {
            inner = match deadline {
                None => self.labels_ready.wait(inner).unwrap_or_else(|p| p.into_inner()),
                Some(d) => {
                    let left = d.saturating_duration_since(Instant::now());
                    if left.is_zero() {
                        return Err(Error::Oracle(format!("no labels within {:?}", self.config.oracle_timeout().unwrap_or_default())));
                    }
                    self.labels_ready.wait_timeout(inner, left).unwrap_or_else(|p| p.into_inner()).0
                }
            };
        }
        if inner.shutdown {
            return Ok(None);
        }
        let by_id: BTreeMap<&GroupId, usize> = inner
            .pending
            .iter()
            .map(|q| (&q.group_id, q.submitted_label.expect("all labeled when the round advances")))
            .collect();
        Ok(Some(ids.iter().map(|id| by_id[id]).collect()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}
