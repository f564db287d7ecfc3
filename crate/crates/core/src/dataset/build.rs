//! Simulation + reconstruction of every manifest entry into sample groups,
//! and persistence of the resulting dataset directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestEntry, Split};
use super::pools::{DepthRange, GroupId, Pools, SampleGroup, TestItem, TestSet};
use crate::error::{Error, Result};
use crate::photon_sim::{simulate, PhotonEvents, SimulationCondition};
use crate::raster::{read_raster, write_raster, RasterKind};
use crate::recon::{reconstruct, DepthImage};
use crate::rng;

/// Events and reconstructions of one manifest entry.
#[derive(Clone, Debug)]
pub struct SimulatedEntry {
    pub observed_events: PhotonEvents,
    pub observed: DepthImage,
    pub variant_events: Vec<PhotonEvents>,
    pub variants: Vec<DepthImage>,
}

/// Pools plus held-out test set.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub pools: Pools,
    pub test: TestSet,
}

fn quantized(img: DepthImage) -> DepthImage {
    // images are persisted as f32; keep the in-memory copy identical
    DepthImage {
        depth_m: img.depth_m.map(|d| d as f32 as f64),
        valid_mask: img.valid_mask,
    }
}

/// Seed used for entry `index`, image `slot` (0 = observed, j+1 = variant j).
pub fn image_seed(seed: u64, index: usize, slot: usize) -> u64 {
    rng::derive_seed(seed, &[index as u64, slot as u64])
}

pub fn simulate_entry(
    manifest: &Manifest,
    index: usize,
    conditions: &[SimulationCondition],
    reference: &SimulationCondition,
    seed: u64,
) -> Result<SimulatedEntry> {
    let entry = &manifest.entries[index];
    let scene = manifest.load_scene(entry)?;
    let observed_events = simulate(&scene, reference, image_seed(seed, index, 0))?;
    let observed = quantized(reconstruct(&observed_events)?);
    let mut variant_events = Vec::new();
    let mut variants = Vec::new();
    if entry.split == Split::Train {
        for (j, cond) in conditions.iter().enumerate() {
            let ev = simulate(&scene, cond, image_seed(seed, index, j + 1))?;
            variants.push(quantized(reconstruct(&ev)?));
            variant_events.push(ev);
        }
    }
    Ok(SimulatedEntry {
        observed_events,
        observed,
        variant_events,
        variants,
    })
}

/// Builds pools (train split, all unlabeled) and the test set (observed
/// images only). `sink` sees every entry as it is produced.
pub fn build_dataset_with(
    manifest: &Manifest,
    conditions: &[SimulationCondition],
    reference: &SimulationCondition,
    seed: u64,
    mut sink: impl FnMut(&ManifestEntry, &SimulatedEntry) -> Result<()>,
) -> Result<Dataset> {
    if manifest.entries.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    if conditions.is_empty() {
        return Err(Error::EmptyConditions);
    }
    reference.validate()?;
    let mut groups = Vec::new();
    let mut test = Vec::new();
    for (index, entry) in manifest.entries.iter().enumerate() {
        let sim = simulate_entry(manifest, index, conditions, reference, seed)?;
        sink(entry, &sim)?;
        let id = GroupId(entry.id.clone());
        match entry.split {
            Split::Train => groups.push((
                SampleGroup {
                    id,
                    observed: sim.observed,
                    variants: sim.variants,
                    label: None,
                },
                entry.label,
            )),
            Split::Test => test.push(TestItem {
                id,
                image: sim.observed,
                label: entry.label,
            }),
        }
    }
    let range = DepthRange::of_images(
        groups
            .iter()
            .flat_map(|(g, _)| g.images())
            .chain(test.iter().map(|t| &t.image)),
    );
    Ok(Dataset {
        pools: Pools::new(manifest.class_names.clone(), range, groups)?,
        test: TestSet { items: test },
    })
}

pub fn build_dataset(
    manifest: &Manifest,
    conditions: &[SimulationCondition],
    reference: &SimulationCondition,
    seed: u64,
) -> Result<Dataset> {
    build_dataset_with(manifest, conditions, reference, seed, |_, _| Ok(()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotGroup {
    pub id: String,
    pub split: Split,
    pub label: usize,
    pub observed: PathBuf,
    pub variants: Vec<PathBuf>,
}

/// `pools.json`: everything needed to reload a simulated dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoolsSnapshot {
    pub class_names: Vec<String>,
    pub depth_range: DepthRange,
    pub variants_per_group: usize,
    pub seed: u64,
    pub reference: SimulationCondition,
    pub conditions: Vec<SimulationCondition>,
    pub groups: Vec<SnapshotGroup>,
}

/// Simulates a manifest and writes `events/`, `images/` and `pools.json`
/// under `out_dir`.
pub fn simulate_to_dir(
    manifest: &Manifest,
    conditions: &[SimulationCondition],
    reference: &SimulationCondition,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Dataset> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("events"))?;
    fs::create_dir_all(out_dir.join("images"))?;
    let mut snapshot_groups = Vec::new();
    let dataset = build_dataset_with(manifest, conditions, reference, seed, |entry, sim| {
        let obs = PathBuf::from("images").join(format!("{}_obs.dph", entry.id));
        sim.observed_events
            .save(out_dir.join("events").join(format!("{}_obs.phe", entry.id)))?;
        write_raster(out_dir.join(&obs), RasterKind::Depth, &sim.observed.depth_m)?;
        let mut variants = Vec::new();
        for (j, (ev, img)) in sim.variant_events.iter().zip(&sim.variants).enumerate() {
            let p = PathBuf::from("images").join(format!("{}_v{j}.dph", entry.id));
            ev.save(out_dir.join("events").join(format!("{}_v{j}.phe", entry.id)))?;
            write_raster(out_dir.join(&p), RasterKind::Depth, &img.depth_m)?;
            variants.push(p);
        }
        snapshot_groups.push(SnapshotGroup {
            id: entry.id.clone(),
            split: entry.split,
            label: entry.label,
            observed: obs,
            variants,
        });
        Ok(())
    })?;
    let snapshot = PoolsSnapshot {
        class_names: manifest.class_names.clone(),
        depth_range: dataset.pools.depth_range(),
        variants_per_group: conditions.len(),
        seed,
        reference: reference.clone(),
        conditions: conditions.to_vec(),
        groups: snapshot_groups,
    };
    let mut json = serde_json::to_vec_pretty(&snapshot)?;
    json.push(b'\n');
    fs::write(out_dir.join("pools.json"), json)?;
    Ok(dataset)
}

/// Reloads a dataset written by [`simulate_to_dir`].
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let snapshot: PoolsSnapshot = serde_json::from_slice(&fs::read(dir.join("pools.json"))?)?;
    let load = |p: &PathBuf| -> Result<DepthImage> {
        Ok(DepthImage::from_depth(read_raster(dir.join(p), RasterKind::Depth)?))
    };
    let mut groups = Vec::new();
    let mut test = Vec::new();
    for g in &snapshot.groups {
        let id = GroupId(g.id.clone());
        match g.split {
            Split::Train => groups.push((
                SampleGroup {
                    id,
                    observed: load(&g.observed)?,
                    variants: g.variants.iter().map(load).collect::<Result<_>>()?,
                    label: None,
                },
                g.label,
            )),
            Split::Test => test.push(TestItem {
                id,
                image: load(&g.observed)?,
                label: g.label,
            }),
        }
    }
    Ok(Dataset {
        pools: Pools::new(snapshot.class_names, snapshot.depth_range, groups)?,
        test: TestSet { items: test },
    })
}

/// Default variant conditions: MSPPP 0.5, 1, 2 and 8 at SBR 4.
pub fn default_variant_conditions() -> Vec<SimulationCondition> {
    [0.5, 1.0, 2.0, 8.0]
        .iter()
        .map(|&m| SimulationCondition::default().with_flux(m, 4.0))
        .collect()
}

/// Default observed-image condition: MSPPP 4 at SBR 4.
pub fn default_reference_condition() -> SimulationCondition {
    SimulationCondition::default().with_flux(4.0, 4.0)
}
