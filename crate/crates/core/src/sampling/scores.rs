//! Group-level uncertainty and inconsistency scores.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::{mean_prediction, Prediction};
use crate::dataset::GroupId;
use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Gap between the two largest probabilities.
pub fn margin_score(p: &Prediction) -> Result<f64> {
    if p.class_count() < 2 {
        return Err(Error::InvalidRequest("margin needs at least two classes".into()));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in &p.probs {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(first - second)
}

/// `KL(p || q)` with `0 log(0/q) = 0`.
pub fn kl_divergence(p: &Prediction, q: &Prediction) -> f64 {
    p.probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.max(PROB_FLOOR).ln() - qi.max(PROB_FLOOR).ln()))
        .sum()
}

/// Mean KL divergence of each member prediction from the group mean.
pub fn divergence_score(predictions: &[Prediction], mean: &Prediction) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions.iter().map(|p| kl_divergence(p, mean)).sum::<f64>() / predictions.len() as f64
}

pub fn uis_score(div_var: f64, margin: f64) -> f64 {
    div_var - margin
}

/// Shannon entropy in nats, `0 log 0 = 0`.
pub fn entropy(p: &Prediction) -> f64 {
    -p.probs.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredGroup {
    pub id: GroupId,
    pub margin: f64,
    pub div_var: f64,
    pub uis: f64,
}

impl ScoredGroup {
    /// Scores a group from the predictions of all its images.
    pub fn from_predictions(id: GroupId, predictions: &[Prediction]) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::Empty("group predictions"));
        }
        let mean = mean_prediction(predictions);
        let margin = margin_score(&mean)?;
        let div_var = divergence_score(predictions, &mean);
        Ok(Self {
            id,
            margin,
            div_var,
            uis: uis_score(div_var, margin),
        })
    }
}

/// Writes `id,margin,div_var,uis` rows.
pub fn write_scores_csv<W: Write>(out: W, scored: &[ScoredGroup]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for s in scored {
        w.serialize(s).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("csv: {other:?}")),
    }
}
