//! Trainable image classifier exposing class probabilities, penultimate
//! features and last-layer gradient embeddings.

mod checkpoint;
mod network;
mod real;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{softmax_rows, Gradient, Network, Trace, CONV_CHANNELS, FEATURE_DIM};
pub use real::{gemm, Real};

use crate::dataset::{DepthRange, Pools, SampleGroup};
use crate::error::{Error, Result};
use crate::recon::DepthImage;
use crate::rng;

/// Input geometry and class count of a classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub width: usize,
    pub height: usize,
    pub class_count: usize,
}

impl ModelConfig {
    pub fn feature_dim(&self) -> usize {
        FEATURE_DIM
    }
}

/// SGD with momentum under a per-epoch cosine-annealed learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 16,
            epochs: 60,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `lr0 * (1 + cos(pi * epoch / epochs)) / 2`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let phase = std::f64::consts::PI * epoch as f64 / self.epochs as f64;
        0.5 * self.learning_rate * (1.0 + phase.cos())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidRequest(
                "train config needs lr > 0, epochs >= 1, batch_size >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Class probabilities of one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn new(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        Self::new(softmax_rows(logits, logits.len()))
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-epoch mean training loss.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    config: ModelConfig,
    norm: DepthRange,
    net: Network<f32>,
}

const INFER_BATCH: usize = 128;

/// Subtracted after `[0, 1]` normalization. Uncentered inputs (background
/// near 1) let lr 0.1 kill every ReLU in some runs.
const INPUT_CENTER: f64 = 0.5;

impl Classifier {
    pub fn new(config: ModelConfig, norm: DepthRange, seed: u64) -> Self {
        let net = Network::new(config.width, config.height, config.class_count, &mut rng::stream(seed, &[0]));
        Self { config, norm, net }
    }

    pub fn from_network(net: Network<f32>, norm: DepthRange) -> Self {
        let (width, height) = net.input_dims();
        let config = ModelConfig {
            width,
            height,
            class_count: net.classes(),
        };
        Self { config, norm, net }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn normalization(&self) -> DepthRange {
        self.norm
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    /// Input tensor of one image: depth mapped to `[0, 1]` by the dataset
    /// range, then shifted to `[-0.5, 0.5]`.
    pub fn encode_input(&self, image: &DepthImage) -> Result<Vec<f32>> {
        image
            .depth_m
            .ensure_dims((self.config.width, self.config.height))?;
        Ok(image
            .depth_m
            .as_slice()
            .iter()
            .map(|&d| (self.norm.normalize(d) - INPUT_CENTER) as f32)
            .collect())
    }

    fn batched_traces(&self, images: &[&DepthImage]) -> Result<Vec<Trace<f32>>> {
        let mut out = Vec::new();
        for chunk in images.chunks(INFER_BATCH) {
            let mut input = Vec::with_capacity(chunk.len() * self.config.width * self.config.height);
            for img in chunk {
                input.extend(self.encode_input(img)?);
            }
            out.push(self.net.forward(&input, chunk.len()));
        }
        Ok(out)
    }

    /// Logits of each image, in f64.
    pub fn logits_batch(&self, images: &[&DepthImage]) -> Result<Vec<Vec<f64>>> {
        let c = self.config.class_count;
        Ok(self
            .batched_traces(images)?
            .iter()
            .flat_map(|t| {
                t.logits
                    .chunks(c)
                    .map(|row| row.iter().map(|&v| v as f64).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    pub fn predict_proba_batch(&self, images: &[&DepthImage]) -> Result<Vec<Prediction>> {
        Ok(self
            .logits_batch(images)?
            .iter()
            .map(|l| Prediction::from_logits(l))
            .collect())
    }

    pub fn predict_proba(&self, image: &DepthImage) -> Result<Prediction> {
        Ok(self.predict_proba_batch(&[image])?.remove(0))
    }

    /// Penultimate (global-average-pooled) features.
    pub fn features_batch(&self, images: &[&DepthImage]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .batched_traces(images)?
            .iter()
            .flat_map(|t| {
                t.features
                    .chunks(FEATURE_DIM)
                    .map(|row| row.iter().map(|&v| v as f64).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    pub fn features(&self, image: &DepthImage) -> Result<Vec<f64>> {
        Ok(self.features_batch(&[image])?.remove(0))
    }

    /// Gradient of the cross-entropy w.r.t. the affine weights under the
    /// pseudo-label `argmax p`: `(p - onehot) (x) features`, flattened `[C][F]`.
    pub fn grad_embedding_batch(&self, images: &[&DepthImage]) -> Result<Vec<Vec<f64>>> {
        let c = self.config.class_count;
        let mut out = Vec::with_capacity(images.len());
        for t in self.batched_traces(images)? {
            for b in 0..t.batch() {
                let logits: Vec<f64> = t.logits[b * c..(b + 1) * c].iter().map(|&v| v as f64).collect();
                let feats: Vec<f64> = t.features[b * FEATURE_DIM..(b + 1) * FEATURE_DIM]
                    .iter()
                    .map(|&v| v as f64)
                    .collect();
                out.push(gradient_embedding(&Prediction::from_logits(&logits), &feats));
            }
        }
        Ok(out)
    }

    pub fn grad_embedding(&self, image: &DepthImage) -> Result<Vec<f64>> {
        Ok(self.grad_embedding_batch(&[image])?.remove(0))
    }

    /// Mean prediction over the observed image and every variant of a group.
    pub fn group_mean_prediction(&self, group: &SampleGroup) -> Result<Prediction> {
        let images: Vec<&DepthImage> = group.images().collect();
        Ok(mean_prediction(&self.predict_proba_batch(&images)?))
    }

    pub fn to_checkpoint(&self) -> Vec<u8> {
        encode_checkpoint(self)
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        decode_checkpoint(bytes)
    }
}

/// `(p - onehot(argmax p)) (x) features`, row-major `[C][F]`.
pub fn gradient_embedding(pred: &Prediction, features: &[f64]) -> Vec<f64> {
    let y = pred.argmax();
    let mut out = Vec::with_capacity(pred.class_count() * features.len());
    for (k, &p) in pred.probs.iter().enumerate() {
        let coeff = p - if k == y { 1.0 } else { 0.0 };
        out.extend(features.iter().map(|f| coeff * f));
    }
    out
}

/// Arithmetic mean of probability vectors.
pub fn mean_prediction(preds: &[Prediction]) -> Prediction {
    let c = preds.first().map_or(0, Prediction::class_count);
    let mut probs = vec![0.0; c];
    for p in preds {
        for (acc, v) in probs.iter_mut().zip(&p.probs) {
            *acc += v;
        }
    }
    let n = preds.len().max(1) as f64;
    probs.iter_mut().for_each(|v| *v /= n);
    Prediction::new(probs)
}

/// Trains a freshly initialized classifier on labeled images.
pub fn train_images(
    examples: &[(&DepthImage, usize)],
    config: ModelConfig,
    norm: DepthRange,
    cfg: &TrainConfig,
) -> Result<(Classifier, TrainReport)> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    let mut model = Classifier::new(config, norm, cfg.seed);
    let pixels = config.width * config.height;
    let mut inputs = Vec::with_capacity(examples.len() * pixels);
    let mut labels = Vec::with_capacity(examples.len());
    for (img, label) in examples {
        if *label >= config.class_count {
            return Err(Error::LabelOutOfRange {
                label: *label,
                class_count: config.class_count,
            });
        }
        inputs.extend(model.encode_input(img)?);
        labels.push(*label);
    }

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle_rng = rng::stream(cfg.seed, &[1]);
    let mut velocity = vec![0f32; model.net.params().len()];
    let momentum = cfg.momentum as f32;
    let mut report = TrainReport::default();
    let mut batch_input = Vec::with_capacity(cfg.batch_size * pixels);
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch) as f32;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_input.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_input.extend_from_slice(&inputs[i * pixels..(i + 1) * pixels]);
                batch_labels.push(labels[i]);
            }
            let g = model.net.loss_and_gradient(&batch_input, &batch_labels);
            epoch_loss += g.loss * chunk.len() as f64;
            for ((p, v), d) in model.net.params_mut().iter_mut().zip(&mut velocity).zip(&g.grad) {
                *v = momentum * *v + d;
                *p -= lr * *v;
            }
        }
        report.epoch_loss.push(epoch_loss / examples.len() as f64);
    }
    Ok((model, report))
}

/// Trains on every image (observed and variants) of the labeled pool.
pub fn train(pools: &Pools, cfg: &TrainConfig) -> Result<(Classifier, TrainReport)> {
    let mut examples = Vec::new();
    for g in pools.labeled_groups() {
        let label = g.label.expect("labeled group carries a label");
        examples.extend(g.images().map(|img| (img, label)));
    }
    let first = examples.first().ok_or(Error::Empty("labeled set"))?.0;
    let config = ModelConfig {
        width: first.width(),
        height: first.height(),
        class_count: pools.class_count(),
    };
    train_images(&examples, config, pools.depth_range(), cfg)
}
