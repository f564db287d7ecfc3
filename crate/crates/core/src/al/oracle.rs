//! Labeling authorities.

use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use crate::dataset::{GroupId, Pools};
use crate::error::{Error, Result};

/// Answers label queries for groups of the unlabeled pool.
pub trait Oracle {
    /// One label per id, in order.
    fn label(&mut self, pools: &Pools, ids: &[GroupId]) -> Result<Vec<usize>>;
}

/// Answers instantly from the pools' withheld ground truth.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimulatedOracle;

impl Oracle for SimulatedOracle {
    fn label(&mut self, pools: &Pools, ids: &[GroupId]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                pools
                    .withheld_label(id)
                    .ok_or_else(|| Error::UnknownGroup(id.to_string()))
            })
            .collect()
    }
}

/// A batch of ids awaiting labels from a person.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryBatch {
    pub ids: Vec<GroupId>,
}

/// Forwards queries over a channel and blocks until the answers arrive or
/// the timeout expires.
#[derive(Debug)]
pub struct ChannelOracle {
    queries: Sender<QueryBatch>,
    answers: Receiver<BTreeMap<GroupId, usize>>,
    timeout: Option<Duration>,
}

impl ChannelOracle {
    pub fn new(
        queries: Sender<QueryBatch>,
        answers: Receiver<BTreeMap<GroupId, usize>>,
        timeout: Option<Duration>,
    ) -> Self {
        Self {
            queries,
            answers,
            timeout,
        }
    }
}

impl Oracle for ChannelOracle {
    fn label(&mut self, _pools: &Pools, ids: &[GroupId]) -> Result<Vec<usize>> {
        self.queries
            .send(QueryBatch { ids: ids.to_vec() })
            .map_err(|_| Error::Oracle("labeling channel closed".into()))?;
        let answers = match self.timeout {
            Some(t) => self.answers.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => Error::Oracle(format!("no labels within {t:?}")),
                RecvTimeoutError::Disconnected => Error::Oracle("labeling channel closed".into()),
            })?,
            None => self
                .answers
                .recv()
                .map_err(|_| Error::Oracle("labeling channel closed".into()))?,
        };
        ids.iter()
            .map(|id| {
                answers
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Oracle(format!("no label for {id}")))
            })
            .collect()
    }
}

/// Rejects answers that are not one in-range label per id.
pub fn check_labels(ids: &[GroupId], labels: &[usize], class_count: usize) -> Result<()> {
    if labels.len() != ids.len() {
        return Err(Error::Oracle(format!(
            "{} labels for {} queries",
            labels.len(),
            ids.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::LabelOutOfRange { label, class_count });
    }
    Ok(())
}
