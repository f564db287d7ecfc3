//! Single-photon LiDAR simulation, depth reconstruction and condition-aware
//! active learning.
//!
//! The pipeline, module by module:
//!
//! - [`photon_sim`]: per-pixel Poisson photon counting with a Gaussian IRF
//!   and uniform background, under a [`photon_sim::SimulationCondition`].
//! - [`recon`]: matched-filter depth estimation, infill and median cleanup;
//!   RMSE / SSIM against ground truth. [`quality`] sweeps them over flux.
//! - [`dataset`]: procedural shape scenes, manifests, and sample groups of
//!   one observed image plus synthetic variants split into pools.
//! - [`classifier`]: a compact CNN trained with SGD, with embeddings and
//!   logits for the samplers.
//! - [`sampling`]: DUIS, entropy, margin, coreset, BADGE and random batch
//!   selection.
//! - [`al`]: the train / select / label / evaluate loop and its metrics.
//!
//! Everything random is seeded; see [`rng`].

pub mod al;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod photon_sim;
pub mod quality;
pub mod raster;
pub mod recon;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
