//! Reconstruction quality as a function of photon flux.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_sim::{simulate, SceneTruth, SimulationCondition};
use crate::recon::{image_quality, reconstruct};
use crate::rng;

/// Mean quality over all scenes at one flux level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub msppp: f64,
    pub sbr: f64,
    pub scenes: usize,
    pub rmse_mean: f64,
    pub ssim_mean: f64,
}

/// Simulates and reconstructs every scene at every `msppp` (other settings
/// from `base`). Scene `i` uses the same seed at every level.
pub fn quality_sweep(
    scenes: &[SceneTruth],
    base: &SimulationCondition,
    msppp: &[f64],
    seed: u64,
) -> Result<Vec<QualityRow>> {
    if msppp.is_empty() {
        return Err(Error::Empty("msppp sweep"));
    }
    if scenes.is_empty() {
        return Err(Error::Empty("scene list"));
    }
    msppp
        .iter()
        .map(|&m| {
            let cond = base.clone().with_flux(m, base.sbr);
            cond.validate()?;
            let (mut rmse, mut ssim) = (0.0, 0.0);
            for (i, scene) in scenes.iter().enumerate() {
                let events = simulate(scene, &cond, rng::derive_seed(seed, &[i as u64]))?;
                let q = image_quality(&reconstruct(&events)?, scene)?;
                rmse += q.rmse;
                ssim += q.ssim;
            }
            let n = scenes.len() as f64;
            Ok(QualityRow {
                msppp: m,
                sbr: cond.sbr,
                scenes: scenes.len(),
                rmse_mean: rmse / n,
                ssim_mean: ssim / n,
            })
        })
        .collect()
}

/// `msppp,sbr,scenes,rmse_mean,ssim_mean`.
pub fn write_quality_csv<W: Write>(out: W, rows: &[QualityRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(crate::sampling::csv_error)?;
    }
    w.flush()?;
    Ok(())
}
