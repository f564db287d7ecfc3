//! Confusion-matrix metrics, macro-averaged and reported in percent.

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::TestSet;
use crate::error::{Error, Result};
use crate::recon::DepthImage;

/// `counts[truth][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            counts: vec![vec![0; class_count]; class_count],
        }
    }

    pub fn from_pairs(class_count: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::new(class_count);
        for (truth, predicted) in pairs {
            for label in [truth, predicted] {
                if label >= class_count {
                    return Err(Error::LabelOutOfRange { label, class_count });
                }
            }
            m.counts[truth][predicted] += 1;
        }
        Ok(m)
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    fn actual(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// One-vs-rest precision, recall and F1 of class `c`, in percent.
    pub fn class_metrics(&self, c: usize) -> ClassMetrics {
        let precision = ratio(self.true_positives(c), self.predicted(c));
        let recall = ratio(self.true_positives(c), self.actual(c));
        ClassMetrics {
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * harmonic(precision, recall),
        }
    }

    /// Accuracy plus macro-averaged precision and recall; F1 is the harmonic
    /// mean of the two macro averages.
    pub fn metrics(&self) -> Result<Metrics> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("test set"));
        }
        let c = self.class_count();
        let trace: u64 = (0..c).map(|k| self.true_positives(k)).sum();
        let precision = (0..c)
            .map(|k| ratio(self.true_positives(k), self.predicted(k)))
            .sum::<f64>()
            / c as f64;
        let recall = (0..c)
            .map(|k| ratio(self.true_positives(k), self.actual(k)))
            .sum::<f64>()
            / c as f64;
        Ok(Metrics {
            accuracy: 100.0 * ratio(trace, total),
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * harmonic(precision, recall),
        })
    }
}

/// `0 / 0 = 0`.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Classification metrics in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion matrix of the model on the observed test images.
pub fn confusion(model: &Classifier, test: &TestSet) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let images: Vec<&DepthImage> = test.items.iter().map(|t| &t.image).collect();
    let preds = model.predict_proba_batch(&images)?;
    ConfusionMatrix::from_pairs(
        model.config().class_count,
        test.items.iter().zip(&preds).map(|(t, p)| (t.label, p.argmax())),
    )
}

pub fn evaluate(model: &Classifier, test: &TestSet) -> Result<Metrics> {
    confusion(model, test)?.metrics()
}
