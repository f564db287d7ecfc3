//! Batch selection strategies over the unlabeled pool.
//!
//! The model-driven selectors (`select_*`) only gather model outputs; the
//! actual decisions live in pure functions over id-keyed maps
//! ([`top_uis`], [`rank_ascending`], [`cluster::candidate_pool`], ...), which
//! makes every strategy invariant to pool iteration order.

pub mod cluster;
mod scores;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, Prediction};
use crate::dataset::{GroupId, Pools};
use crate::error::{Error, Result};
use crate::recon::DepthImage;
use crate::rng;

pub use cluster::{badge_seeding, candidate_pool, k_center_greedy, squared_distance, FeatureMap};
pub(crate) use scores::csv_error;
pub use scores::{
    divergence_score, entropy, kl_divergence, margin_score, uis_score, write_scores_csv, ScoredGroup, PROB_FLOOR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Duis,
    Entropy,
    Margin,
    Coreset,
    Badge,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Duis,
        Strategy::Entropy,
        Strategy::Margin,
        Strategy::Coreset,
        Strategy::Badge,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Duis => "duis",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::Coreset => "coreset",
            Strategy::Badge => "badge",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidRequest(format!("unknown strategy {s:?}")))
    }
}

/// One selection call against the current unlabeled pool.
#[derive(Clone, Copy, Debug)]
pub struct SelectionRequest<'a> {
    pub model: &'a Classifier,
    pub pools: &'a Pools,
    pub batch: usize,
    /// Candidate-pool size; only DUIS uses it.
    pub candidates: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl SelectionRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        let available = self.pools.unlabeled_ids().len();
        if self.batch == 0 || self.batch > available {
            return Err(Error::InvalidRequest(format!(
                "batch size {} must be in 1..={available}",
                self.batch
            )));
        }
        if self.strategy == Strategy::Duis && !(self.batch..=available).contains(&self.candidates) {
            return Err(Error::InvalidRequest(format!(
                "candidate size {} must be in {}..={available}",
                self.candidates, self.batch
            )));
        }
        Ok(())
    }
}

/// Selected ids plus, for DUIS, the scored candidate pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub ids: Vec<GroupId>,
    pub scored: Vec<ScoredGroup>,
}

pub fn select(req: &SelectionRequest) -> Result<Selection> {
    match req.strategy {
        Strategy::Duis => select_duis_scored(req),
        Strategy::Entropy => select_entropy(req).map(plain),
        Strategy::Margin => select_margin(req).map(plain),
        Strategy::Coreset => select_coreset(req).map(plain),
        Strategy::Badge => select_badge(req).map(plain),
        Strategy::Random => select_random(req).map(plain),
    }
}

fn plain(ids: Vec<GroupId>) -> Selection {
    Selection { ids, scored: Vec::new() }
}

fn observed_images<'a>(pools: &'a Pools, ids: impl IntoIterator<Item = &'a GroupId>) -> Vec<(&'a GroupId, &'a DepthImage)> {
    ids.into_iter()
        .map(|id| (id, &pools.group(id).expect("pool id resolves").observed))
        .collect()
}

fn unlabeled_observed<'a>(pools: &'a Pools) -> Vec<(&'a GroupId, &'a DepthImage)> {
    observed_images(pools, pools.unlabeled_ids())
}

fn keyed<T>(pairs: &[(&GroupId, &DepthImage)], values: Vec<T>) -> BTreeMap<GroupId, T> {
    pairs.iter().map(|(id, _)| (*id).clone()).zip(values).collect()
}

fn unlabeled_predictions(req: &SelectionRequest) -> Result<BTreeMap<GroupId, Prediction>> {
    let pairs = unlabeled_observed(req.pools);
    let images: Vec<&DepthImage> = pairs.iter().map(|(_, img)| *img).collect();
    Ok(keyed(&pairs, req.model.predict_proba_batch(&images)?))
}

fn unlabeled_features(req: &SelectionRequest) -> Result<FeatureMap> {
    let pairs = unlabeled_observed(req.pools);
    let images: Vec<&DepthImage> = pairs.iter().map(|(_, img)| *img).collect();
    Ok(keyed(&pairs, req.model.features_batch(&images)?))
}

/// The `n` highest-UIS groups; ties go to higher `div_var`, then lowest id.
pub fn top_uis(scored: &[ScoredGroup], n: usize) -> Vec<GroupId> {
    let mut order: Vec<&ScoredGroup> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.uis
            .total_cmp(&a.uis)
            .then(b.div_var.total_cmp(&a.div_var))
            .then_with(|| a.id.cmp(&b.id))
    });
    order.into_iter().take(n).map(|s| s.id.clone()).collect()
}

/// The `n` ids with the smallest score; ties go to the lowest id.
pub fn rank_ascending(scores: &BTreeMap<GroupId, f64>, n: usize) -> Vec<GroupId> {
    let mut order: Vec<(&GroupId, f64)> = scores.iter().map(|(id, &s)| (id, s)).collect();
    // Stable sort over id-ordered input keeps the lowest id first on ties.
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    order.into_iter().take(n).map(|(id, _)| id.clone()).collect()
}

/// The `n` ids with the largest score; ties go to the lowest id.
pub fn rank_descending(scores: &BTreeMap<GroupId, f64>, n: usize) -> Vec<GroupId> {
    let mut order: Vec<(&GroupId, f64)> = scores.iter().map(|(id, &s)| (id, s)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order.into_iter().take(n).map(|(id, _)| id.clone()).collect()
}

/// DUIS: k-means candidate pool on penultimate features of the observed
/// images, then the top-UIS candidates.
pub fn select_duis_scored(req: &SelectionRequest) -> Result<Selection> {
    req.validate()?;
    let features = unlabeled_features(req)?;
    let candidates = candidate_pool(&features, req.candidates, &mut rng::stream(req.seed, &[1]))?;
    let scored = score_groups(req.model, req.pools, &candidates)?;
    Ok(Selection {
        ids: top_uis(&scored, req.batch),
        scored,
    })
}

pub fn select_duis(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    select_duis_scored(req).map(|s| s.ids)
}

/// Scores groups from the predictions on all their images.
pub fn score_groups(model: &Classifier, pools: &Pools, ids: &[GroupId]) -> Result<Vec<ScoredGroup>> {
    let mut images = Vec::new();
    let mut spans = Vec::with_capacity(ids.len());
    for id in ids {
        let group = pools
            .group(id)
            .ok_or_else(|| Error::UnknownGroup(id.to_string()))?;
        let start = images.len();
        images.extend(group.images());
        spans.push(start..images.len());
    }
    let preds = model.predict_proba_batch(&images)?;
    ids.iter()
        .zip(spans)
        .map(|(id, span)| ScoredGroup::from_predictions(id.clone(), &preds[span]))
        .collect()
}

pub fn select_entropy(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    req.validate()?;
    let scores = unlabeled_predictions(req)?
        .into_iter()
        .map(|(id, p)| (id, entropy(&p)))
        .collect();
    Ok(rank_descending(&scores, req.batch))
}

pub fn select_margin(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    req.validate()?;
    let scores = unlabeled_predictions(req)?
        .into_iter()
        .map(|(id, p)| margin_score(&p).map(|m| (id, m)))
        .collect::<Result<_>>()?;
    Ok(rank_ascending(&scores, req.batch))
}

/// k-center greedy on penultimate features of observed images.
pub fn select_coreset(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    req.validate()?;
    let labeled = observed_images(req.pools, req.pools.labeled_ids());
    let images: Vec<&DepthImage> = labeled.iter().map(|(_, img)| *img).collect();
    let labeled_features = req.model.features_batch(&images)?;
    k_center_greedy(&labeled_features, &unlabeled_features(req)?, req.batch)
}

pub fn select_badge(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    req.validate()?;
    let pairs = unlabeled_observed(req.pools);
    let images: Vec<&DepthImage> = pairs.iter().map(|(_, img)| *img).collect();
    let embeddings = keyed(&pairs, req.model.grad_embedding_batch(&images)?);
    badge_seeding(&embeddings, req.batch, &mut rng::stream(req.seed, &[2]))
}

pub fn select_random(req: &SelectionRequest) -> Result<Vec<GroupId>> {
    req.validate()?;
    Ok(random_subset(
        req.pools.unlabeled_ids().iter(),
        req.batch,
        &mut rng::stream(req.seed, &[3]),
    ))
}

/// Uniform sample without replacement from ids in ascending order.
pub fn random_subset<'a>(ids: impl IntoIterator<Item = &'a GroupId>, n: usize, rng: &mut rng::Rng) -> Vec<GroupId> {
    let mut sorted: Vec<&GroupId> = ids.into_iter().collect();
    sorted.sort();
    let n = n.min(sorted.len());
    let mut picks: Vec<usize> = index::sample(rng, sorted.len(), n).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| sorted[i].clone()).collect()
}
