//! Feature-space geometry: k-means candidate pools, k-center greedy and
//! D² (k-means++) seeding.
//!
//! Inputs are keyed by [`GroupId`] in a `BTreeMap`, so iteration order is the
//! id order and every tie-break below resolves to the lowest id.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::dataset::GroupId;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub type FeatureMap = BTreeMap<GroupId, Vec<f64>>;

pub const LLOYD_TOLERANCE: f64 = 1e-6;
pub const LLOYD_MAX_ITERATIONS: usize = 100;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Draws an index with probability proportional to `weights`. All-zero
/// weights fall back to the first index whose `fallback` flag is set.
fn sample_weighted(weights: &[f64], fallback: &[bool], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let mut u = rng.random::<f64>() * total;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if u < w {
                    return i;
                }
                u -= w;
            }
        }
        // Rounding pushed u past the end: take the last positive weight.
        if let Some(i) = weights.iter().rposition(|&w| w > 0.0) {
            return i;
        }
    }
    fallback.iter().position(|&f| f).expect("an unchosen point remains")
}

/// Continues D² seeding from `first` until `k` distinct points are chosen.
fn d2_seeding(points: &[&[f64]], first: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut chosen = vec![first];
    let mut unchosen = vec![true; points.len()];
    unchosen[first] = false;
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, points[first])).collect();
    while chosen.len() < k {
        let weights: Vec<f64> = nearest
            .iter()
            .zip(&unchosen)
            .map(|(&d, &u)| if u { d } else { 0.0 })
            .collect();
        let next = sample_weighted(&weights, &unchosen, rng);
        chosen.push(next);
        unchosen[next] = false;
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, points[next]));
        }
    }
    chosen
}

/// k-means++ seeding: a uniformly drawn first centre, then D² sampling.
pub fn kmeans_pp_seeds(points: &[&[f64]], k: usize, rng: &mut Rng) -> Vec<usize> {
    if k == 0 || points.is_empty() {
        return Vec::new();
    }
    let first = rng.random_range(0..points.len());
    d2_seeding(points, first, k, rng)
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(p, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Result of Lloyd iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd's algorithm from the given initial centroids. Empty clusters keep
/// their previous centroid.
pub fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let dim = points.first().map_or(0, |p| p.len());
    let mut assignment = vec![0; points.len()];
    let mut iterations = 0;
    while iterations < LLOYD_MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest_centroid(p, &centroids);
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for ((c, sum), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n == 0 {
                continue;
            }
            let updated: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
            shift = shift.max(squared_distance(c, &updated).sqrt());
            *c = updated;
        }
        if shift < LLOYD_TOLERANCE {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest_centroid(p, &centroids);
    }
    KMeans {
        centroids,
        assignment,
        iterations,
    }
}

/// Diverse candidate pool: `k = n_cand` clusters, one representative per
/// cluster (the member nearest its centroid). Dead clusters take the
/// globally nearest unchosen id. Returned sorted by id.
pub fn candidate_pool(features: &FeatureMap, n_cand: usize, rng: &mut Rng) -> Result<Vec<GroupId>> {
    if n_cand == 0 || n_cand > features.len() {
        return Err(Error::InvalidRequest(format!(
            "candidate size {n_cand} must be in 1..={}",
            features.len()
        )));
    }
    let ids: Vec<&GroupId> = features.keys().collect();
    let points: Vec<&[f64]> = features.values().map(Vec::as_slice).collect();
    let seeds = kmeans_pp_seeds(&points, n_cand, rng);
    let km = lloyd(&points, seeds.iter().map(|&i| points[i].to_vec()).collect());

    let mut rep: Vec<Option<usize>> = vec![None; n_cand];
    for (i, &c) in km.assignment.iter().enumerate() {
        let d = squared_distance(points[i], &km.centroids[c]);
        match rep[c] {
            Some(j) if squared_distance(points[j], &km.centroids[c]) <= d => {}
            _ => rep[c] = Some(i),
        }
    }
    let mut taken = vec![false; points.len()];
    for &i in rep.iter().flatten() {
        taken[i] = true;
    }
    for c in 0..n_cand {
        if rep[c].is_some() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = squared_distance(p, &km.centroids[c]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("n_cand <= number of points");
        taken[i] = true;
        rep[c] = Some(i);
    }
    let mut out: Vec<GroupId> = rep.into_iter().flatten().map(|i| ids[i].clone()).collect();
    out.sort();
    Ok(out)
}

/// k-center greedy: repeatedly takes the unlabeled point farthest (in its
/// minimum distance) from the labeled points and earlier picks.
pub fn k_center_greedy(labeled: &[Vec<f64>], unlabeled: &FeatureMap, n: usize) -> Result<Vec<GroupId>> {
    if n > unlabeled.len() {
        return Err(Error::InvalidRequest(format!(
            "batch {n} exceeds {} unlabeled groups",
            unlabeled.len()
        )));
    }
    let ids: Vec<&GroupId> = unlabeled.keys().collect();
    let points: Vec<&Vec<f64>> = unlabeled.values().collect();
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| {
            labeled
                .iter()
                .map(|l| squared_distance(p, l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut picked = vec![false; points.len()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for i in 0..points.len() {
            if !picked[i] && best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("n <= number of points");
        picked[b] = true;
        out.push(ids[b].clone());
        for (d, p) in nearest.iter_mut().zip(&points) {
            *d = d.min(squared_distance(p, points[b]));
        }
    }
    Ok(out)
}

/// BADGE seeding over gradient embeddings: the max-norm embedding first
/// (lowest id on ties), then D² sampling. Returned in pick order.
pub fn badge_seeding(embeddings: &FeatureMap, n: usize, rng: &mut Rng) -> Result<Vec<GroupId>> {
    if n == 0 || n > embeddings.len() {
        return Err(Error::InvalidRequest(format!(
            "batch {n} must be in 1..={}",
            embeddings.len()
        )));
    }
    let ids: Vec<&GroupId> = embeddings.keys().collect();
    let points: Vec<&[f64]> = embeddings.values().map(Vec::as_slice).collect();
    let norms: Vec<f64> = points.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
    let mut first = 0;
    for (i, &v) in norms.iter().enumerate() {
        if v > norms[first] {
            first = i;
        }
    }
    Ok(d2_seeding(&points, first, n, rng)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect())
}
